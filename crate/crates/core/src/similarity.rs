//! Sequence similarity measures: ILCSS with semantic guards, classic LCSS,
//! DTW and Minkowski distance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{ConceptIdx, Ontology};
use crate::trace::{SemanticFeature, Trace};

/// Match thresholds for [`ilcss`].
///
/// Two features match when their objects are within `alpha` semantic
/// distance, every positional qualification pair is within `beta`, and every
/// value pair differs by at most `delta`. All comparisons are inclusive.
///
/// `epsilon`, when set, is a window over tail-anchored positions: element
/// `i` of `A` and `j` of `B` may only pair when
/// `|(|A| - i) - (|B| - j)| <= epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: Option<usize>,
}

impl SimilarityParams {
    pub fn new(alpha: f64, beta: f64, delta: f64, epsilon: Option<usize>) -> Result<Self> {
        let p = SimilarityParams {
            alpha,
            beta,
            delta,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn in_window(&self, n: usize, m: usize, i: usize, j: usize) -> bool {
        match self.epsilon {
            None => true,
            Some(eps) => ((n - i) as isize - (m - j) as isize).unsigned_abs() <= eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Ilcss,
    Lcss,
    Dtw,
    Minkowski,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Ilcss => "ilcss",
            Measure::Lcss => "lcss",
            Measure::Dtw => "dtw",
            Measure::Minkowski => "minkowski",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ilcss" => Ok(Measure::Ilcss),
            "lcss" => Ok(Measure::Lcss),
            "dtw" => Ok(Measure::Dtw),
            "minkowski" => Ok(Measure::Minkowski),
            other => Err(Error::InvalidParameter(format!("unknown measure: {other}"))),
        }
    }
}

/// Matched index pairs `(index into A, index into B)`, strictly increasing
/// in both coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn last(&self) -> Option<(usize, usize)> {
        self.pairs.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub measure: Measure,
    pub raw_length: usize,
    pub normalized: f64,
    pub alignment: Alignment,
}

/// A semantic feature with concepts resolved to ontology indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFeature {
    object: ConceptIdx,
    quals: Box<[(ConceptIdx, f64)]>,
}

impl EncodedFeature {
    pub fn encode(sf: &SemanticFeature, ontology: &Ontology) -> Result<Self> {
        Ok(EncodedFeature {
            object: ontology.resolve(&sf.object)?,
            quals: sf
                .quals
                .iter()
                .map(|q| Ok((ontology.resolve(&q.q)?, q.v)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn dimension(&self) -> usize {
        self.quals.len()
    }

    /// The ILCSS match guard. Both features must have the same dimension.
    #[inline]
    pub fn matches(
        &self,
        other: &EncodedFeature,
        params: &SimilarityParams,
        ontology: &Ontology,
    ) -> bool {
        debug_assert_eq!(self.quals.len(), other.quals.len());
        ontology.distance(self.object, other.object) <= params.alpha
            && self
                .quals
                .iter()
                .zip(other.quals.iter())
                .all(|(&(qa, va), &(qb, vb))| {
                    (va - vb).abs() <= params.delta && ontology.distance(qa, qb) <= params.beta
                })
    }
}

/// Encode a feature sequence, checking that every feature has dimension `d`
/// (or the first feature's dimension when `d` is `None`).
pub fn encode_features<'a>(
    features: impl IntoIterator<Item = &'a SemanticFeature>,
    mut d: Option<usize>,
    ontology: &Ontology,
) -> Result<Vec<EncodedFeature>> {
    features
        .into_iter()
        .map(|sf| {
            let expected = *d.get_or_insert(sf.dimension());
            if sf.dimension() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: sf.dimension(),
                });
            }
            EncodedFeature::encode(sf, ontology)
        })
        .collect()
}

pub fn sf_match(
    a: &SemanticFeature,
    b: &SemanticFeature,
    params: &SimilarityParams,
    ontology: &Ontology,
) -> Result<bool> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    let a = EncodedFeature::encode(a, ontology)?;
    let b = EncodedFeature::encode(b, ontology)?;
    Ok(a.matches(&b, params, ontology))
}

/// ILCSS between two traces.
pub fn ilcss(
    a: &Trace,
    b: &Trace,
    params: &SimilarityParams,
    ontology: &Ontology,
) -> Result<MatchReport> {
    if let (Some(da), Some(db)) = (a.dimension(), b.dimension()) {
        if da != db {
            return Err(Error::DimensionMismatch {
                expected: da,
                found: db,
            });
        }
    }
    let ea = encode_features(a.features(), a.dimension(), ontology)?;
    let eb = encode_features(b.features(), a.dimension().or(b.dimension()), ontology)?;
    Ok(ilcss_encoded(&ea, &eb, params, ontology))
}

/// ILCSS between two bare feature sequences.
pub fn ilcss_features(
    a: &[SemanticFeature],
    b: &[SemanticFeature],
    params: &SimilarityParams,
    ontology: &Ontology,
) -> Result<MatchReport> {
    let ea = encode_features(a, None, ontology)?;
    let d = ea.first().map(EncodedFeature::dimension);
    let eb = encode_features(b, d, ontology)?;
    Ok(ilcss_encoded(&ea, &eb, params, ontology))
}

/// ILCSS kernel over encoded sequences of equal dimension.
///
/// Fills the suffix table `L[i][j] = ILCSS(A[i..], B[j..])` bottom-up:
/// a head match contributes `1 + L[i+1][j+1]`, otherwise the best of
/// dropping either head. Backtracking from `(0, 0)` takes the match when the
/// heads match, otherwise advances `A` unless advancing `B` is strictly
/// better.
pub fn ilcss_encoded(
    a: &[EncodedFeature],
    b: &[EncodedFeature],
    params: &SimilarityParams,
    ontology: &Ontology,
) -> MatchReport {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return MatchReport {
            measure: Measure::Ilcss,
            raw_length: 0,
            normalized: 0.0,
            alignment: Alignment::default(),
        };
    }

    let allowed: Vec<bool> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| params.in_window(n, m, i, j) && a[i].matches(&b[j], params, ontology))
        .collect();
    let table = suffix_table(n, m, |i, j| allowed[i * m + j]);
    let width = m + 1;

    let mut pairs = Vec::with_capacity(table[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if allowed[i * m + j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[(i + 1) * width + j] >= table[i * width + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let raw_length = table[0] as usize;
    debug_assert_eq!(raw_length, pairs.len());
    MatchReport {
        measure: Measure::Ilcss,
        raw_length,
        normalized: raw_length as f64 / n.min(m) as f64,
        alignment: Alignment { pairs },
    }
}

/// `(n+1) x (m+1)` row-major table of suffix LCSS lengths under `allowed`.
pub(crate) fn suffix_table(n: usize, m: usize, allowed: impl Fn(usize, usize) -> bool) -> Vec<u32> {
    let width = m + 1;
    let mut table = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i * width + j] = if allowed(i, j) {
                1 + table[(i + 1) * width + j + 1]
            } else {
                table[(i + 1) * width + j].max(table[i * width + j + 1])
            };
        }
    }
    table
}

/// Classic longest common subsequence length under exact equality.
pub fn lcss_classic<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Dynamic time warping with absolute-difference cost and the
/// `{(1,0), (0,1), (1,1)}` step set, both endpoints anchored.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("dtw needs two nonempty sequences"));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for (j, &y) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = (x - y).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Minkowski distance of order `p >= 1` between equal-length vectors.
pub fn minkowski(u: &[f64], v: &[f64], p: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "minkowski order must be >= 1, got {p}"
        )));
    }
    let sum: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs().powf(p)).sum();
    Ok(sum.powf(1.0 / p))
}

/// `raw / min(n, m)`, or 0 when either length is 0.
pub fn normalized_similarity(raw: usize, n: usize, m: usize) -> Result<f64> {
    let shorter = n.min(m);
    if raw > shorter {
        return Err(Error::InvalidParameter(format!(
            "raw length {raw} exceeds min({n}, {m})"
        )));
    }
    if shorter == 0 {
        return Ok(0.0);
    }
    Ok(raw as f64 / shorter as f64)
}

/// Value stream of qualification `q` over a trace. Events without `q` are
/// skipped.
pub fn project(trace: &Trace, q: &str) -> Vec<f64> {
    trace.features().filter_map(|sf| sf.value_of(q)).collect()
}
