//! Random generators and independent oracles shared by the integration
//! tests. Nothing here calls into the DP kernels it is used to check.

#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use tracecbr_core::{Concept, Ontology, SemanticFeature, SimilarityParams, Trace, TraceEvent};

// ---------------------------------------------------------------- generators

/// Random DAG of `n` concepts `c0..`: every concept may pick parents among
/// earlier ones, so some draws are disconnected.
pub fn random_concepts<R: Rng>(rng: &mut R, n: usize) -> Vec<Concept> {
    (0..n)
        .map(|i| {
            let mut parents: Vec<String> = (0..i)
                .filter(|_| rng.gen_bool(if i < 3 { 0.5 } else { 0.25 }))
                .map(|j| format!("c{j}"))
                .collect();
            parents.truncate(2);
            Concept {
                id: format!("c{i}"),
                label: format!("Concept {i}"),
                parents,
            }
        })
        .collect()
}

pub fn random_ontology<R: Rng>(rng: &mut R, max: usize) -> Arc<Ontology> {
    let n = rng.gen_range(1..=max);
    Arc::new(Ontology::from_concepts(random_concepts(rng, n)).unwrap())
}

pub fn random_features<R: Rng>(
    rng: &mut R,
    o: &Ontology,
    len: usize,
    d: usize,
) -> Vec<SemanticFeature> {
    let ids: Vec<&str> = o.concepts().iter().map(|c| c.id.as_str()).collect();
    (0..len)
        .map(|_| {
            let object = *ids.choose(rng).unwrap();
            let quals: Vec<(&str, f64)> = (0..d)
                .map(|_| {
                    (
                        *ids.choose(rng).unwrap(),
                        f64::from(rng.gen_range(0..4u8)) * 0.5,
                    )
                })
                .collect();
            SemanticFeature::new(object, quals)
        })
        .collect()
}

pub fn random_params<R: Rng>(rng: &mut R, epsilon: Option<usize>) -> SimilarityParams {
    let pick = |rng: &mut R| match rng.gen_range(0..4) {
        0 => 0.0,
        1 => 0.5,
        2 => 1.0,
        _ => rng.gen_range(0.0..1.0),
    };
    SimilarityParams {
        alpha: pick(rng),
        beta: pick(rng),
        delta: [0.0, 0.5, 1.0, 2.0][rng.gen_range(0..4)],
        epsilon,
    }
}

pub fn to_trace(subject: &str, features: &[SemanticFeature]) -> Trace {
    Trace::from_events(
        subject,
        features
            .iter()
            .enumerate()
            .map(|(i, f)| event(subject, i as i64, f.clone())),
    )
    .unwrap()
}

pub fn event(subject: &str, second: i64, f: SemanticFeature) -> TraceEvent {
    TraceEvent::new(
        Utc.timestamp_opt(1_700_000_000 + second, 0).unwrap(),
        subject,
        f,
    )
}

// ------------------------------------------------------------------- oracles

/// All-pairs semantic distance by plain BFS over the concept list.
pub struct DistanceOracle {
    index: HashMap<String, usize>,
    hops: Vec<Vec<Option<usize>>>,
    diameter: usize,
}

impl DistanceOracle {
    pub fn new(concepts: &[Concept]) -> Self {
        let index: HashMap<String, usize> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        let n = concepts.len();
        let mut adj = vec![vec![]; n];
        for (i, c) in concepts.iter().enumerate() {
            for p in &c.parents {
                adj[i].push(index[p]);
                adj[index[p]].push(i);
            }
        }
        let hops: Vec<Vec<Option<usize>>> = (0..n)
            .map(|s| {
                let mut dist = vec![None; n];
                dist[s] = Some(0);
                let mut q = VecDeque::from([s]);
                while let Some(u) = q.pop_front() {
                    for &v in &adj[u] {
                        if dist[v].is_none() {
                            dist[v] = Some(dist[u].unwrap() + 1);
                            q.push_back(v);
                        }
                    }
                }
                dist
            })
            .collect();
        let diameter = hops.iter().flatten().flatten().copied().max().unwrap_or(0);
        DistanceOracle {
            index,
            hops,
            diameter,
        }
    }

    pub fn ds(&self, a: &str, b: &str) -> f64 {
        let (i, j) = (self.index[a], self.index[b]);
        match self.hops[i][j] {
            Some(0) => 0.0,
            Some(h) if self.diameter > 0 => h as f64 / self.diameter as f64,
            _ => 1.0,
        }
    }
}

pub fn oracle_match(
    a: &SemanticFeature,
    b: &SemanticFeature,
    p: &SimilarityParams,
    ds: &DistanceOracle,
) -> bool {
    ds.ds(&a.object, &b.object) <= p.alpha
        && a.quals
            .iter()
            .zip(&b.quals)
            .all(|(x, y)| ds.ds(&x.q, &y.q) <= p.beta && (x.v - y.v).abs() <= p.delta)
}

fn in_window(p: &SimilarityParams, n: usize, m: usize, i: usize, j: usize) -> bool {
    p.epsilon
        .is_none_or(|e| ((n - i) as i64 - (m - j) as i64).unsigned_abs() as usize <= e)
}

/// Largest set of strictly increasing pairs whose members all match,
/// by exhaustive enumeration.
pub fn brute_force_ilcss(
    a: &[SemanticFeature],
    b: &[SemanticFeature],
    p: &SimilarityParams,
    ds: &DistanceOracle,
) -> usize {
    let (n, m) = (a.len(), b.len());
    let allowed: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| in_window(p, n, m, i, j) && oracle_match(&a[i], &b[j], p, ds))
                .collect()
        })
        .collect();

    fn extend(allowed: &[Vec<bool>], from_i: usize, from_j: usize) -> usize {
        let mut best = 0;
        for i in from_i..allowed.len() {
            for j in from_j..allowed[i].len() {
                if allowed[i][j] {
                    best = best.max(1 + extend(allowed, i + 1, j + 1));
                }
            }
        }
        best
    }
    extend(&allowed, 0, 0)
}

/// The head/Tail recursion taken literally, memoized on suffix offsets.
/// No window.
pub fn recursive_ilcss(
    a: &[SemanticFeature],
    b: &[SemanticFeature],
    p: &SimilarityParams,
    ds: &DistanceOracle,
) -> usize {
    fn go(
        a: &[SemanticFeature],
        b: &[SemanticFeature],
        p: &SimilarityParams,
        ds: &DistanceOracle,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        let key = (a.len(), b.len());
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let v = if oracle_match(&a[0], &b[0], p, ds) {
            1 + go(&a[1..], &b[1..], p, ds, memo)
        } else {
            go(&a[1..], b, p, ds, memo).max(go(a, &b[1..], p, ds, memo))
        };
        memo.insert(key, v);
        v
    }
    go(a, b, p, ds, &mut HashMap::new())
}

/// LCS length by enumerating every subsequence of the shorter input.
pub fn brute_force_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "enumeration oracle is exponential");
    let is_subsequence = |mask: u32| {
        let mut it = long.iter();
        (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .all(|i| it.any(|x| *x == short[i]))
    };
    (0..1u32 << short.len())
        .filter(|&mask| is_subsequence(mask))
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

/// DTW by enumerating every warping path from (0,0) to (n-1,m-1).
pub fn brute_force_dtw(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64) -> f64 {
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            return acc;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(walk(a, b, i + 1, j, acc));
        }
        if j + 1 < b.len() {
            best = best.min(walk(a, b, i, j + 1, acc));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(walk(a, b, i + 1, j + 1, acc));
        }
        best
    }
    walk(a, b, 0, 0, 0.0)
}
