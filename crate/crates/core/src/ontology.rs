//! Domain concept graph and the semantic distance between concepts.
//!
//! Concepts form a DAG through `is-a` parent edges. The distance between two
//! concepts is the undirected shortest-path edge count divided by the
//! ontology diameter, so it always lies in `[0, 1]`. Concepts in different
//! connected components are at distance `1.0`. An ontology without edges
//! uses the discrete metric.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Concept {
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<String>,
}

impl Concept {
    pub fn new(id: impl Into<String>, parents: &[&str]) -> Self {
        let id = id.into();
        Concept {
            label: id.clone(),
            id,
            parents: parents.iter().map(|p| p.to_string()).collect(),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct OntologyFile {
    concepts: Vec<Concept>,
}

/// Dense index of a concept inside one [`Ontology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptIdx(pub(crate) u32);

impl ConceptIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

const UNREACHABLE: u32 = u32::MAX;

/// A validated, immutable concept graph.
///
/// All-pairs hop counts are computed once on construction, so distance
/// lookups are a single table read.
#[derive(Debug, Clone)]
pub struct Ontology {
    concepts: Vec<Concept>,
    index: HashMap<String, ConceptIdx>,
    hops: Vec<u32>,
    diameter: u32,
}

impl Ontology {
    /// Build from a concept list, rejecting it if any invariant is violated.
    pub fn from_concepts(concepts: Vec<Concept>) -> Result<Self> {
        let violations = validate_ontology(&concepts);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }

        let index: HashMap<String, ConceptIdx> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), ConceptIdx(i as u32)))
            .collect();

        let n = concepts.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, c) in concepts.iter().enumerate() {
            for p in &c.parents {
                let j = index[p].index();
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }

        let mut hops = vec![UNREACHABLE; n * n];
        let mut diameter = 0;
        let mut queue = VecDeque::new();
        for source in 0..n {
            let row = &mut hops[source * n..(source + 1) * n];
            row[source] = 0;
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                let next = row[u] + 1;
                for &v in &adjacency[u] {
                    if row[v] == UNREACHABLE {
                        row[v] = next;
                        diameter = diameter.max(next);
                        queue.push_back(v);
                    }
                }
            }
        }

        Ok(Ontology {
            concepts,
            index,
            hops,
            diameter,
        })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Longest finite shortest path, in edges.
    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn resolve(&self, id: &str) -> Result<ConceptIdx> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub fn concept(&self, idx: ConceptIdx) -> &Concept {
        &self.concepts[idx.index()]
    }

    /// Semantic distance between two concept ids.
    pub fn semantic_distance(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.distance(self.resolve(a)?, self.resolve(b)?))
    }

    /// Semantic distance between two resolved concepts.
    #[inline]
    pub fn distance(&self, a: ConceptIdx, b: ConceptIdx) -> f64 {
        let h = self.hops[a.index() * self.concepts.len() + b.index()];
        if h == 0 {
            0.0
        } else if h == UNREACHABLE || self.diameter == 0 {
            1.0
        } else {
            f64::from(h) / f64::from(self.diameter)
        }
    }

    /// Violations of this ontology's invariants. Always empty for an
    /// ontology built through [`Ontology::from_concepts`].
    pub fn validate(&self) -> Vec<String> {
        validate_ontology(&self.concepts)
    }

    /// Serialize back to the JSON file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&OntologyFile {
            concepts: self.concepts.clone(),
        })
        .expect("ontology serialization is infallible")
    }
}

/// Parse and validate an ontology from its JSON file format.
pub fn load_ontology<R: Read>(mut source: R) -> Result<Ontology> {
    let mut buf = String::new();
    source
        .read_to_string(&mut buf)
        .map_err(|e| Error::io(None, e))?;
    let file: OntologyFile = serde_json::from_str(&buf).map_err(|e| Error::Parse(e.to_string()))?;
    Ontology::from_concepts(file.concepts)
}

/// Check the concept-list invariants: non-empty unique ids, resolvable
/// parents, and an acyclic parent relation.
pub fn validate_ontology(concepts: &[Concept]) -> Vec<String> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let mut reported_dupes = HashSet::new();
    for c in concepts {
        if c.id.is_empty() {
            violations.push("empty concept id".to_string());
        }
        if !seen.insert(c.id.as_str()) && reported_dupes.insert(c.id.as_str()) {
            violations.push(format!("duplicate id: {}", c.id));
        }
    }

    let mut dangling = HashSet::new();
    for c in concepts {
        for p in &c.parents {
            if !seen.contains(p.as_str()) && dangling.insert(p.as_str()) {
                violations.push(format!("unknown parent: {p}"));
            }
        }
    }

    // Cycle detection by iterative DFS with three colors over first occurrences.
    let position: HashMap<&str, usize> = concepts
        .iter()
        .enumerate()
        .rev()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color = vec![Color::White; concepts.len()];
    for start in 0..concepts.len() {
        if color[start] != Color::White {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color[start] = Color::Grey;
        while let Some(top) = stack.last_mut() {
            let (node, next) = *top;
            let parents = &concepts[node].parents;
            if next < parents.len() {
                let p = &parents[next];
                top.1 += 1;
                let Some(&pi) = position.get(p.as_str()) else {
                    continue;
                };
                match color[pi] {
                    Color::White => {
                        color[pi] = Color::Grey;
                        stack.push((pi, 0));
                    }
                    Color::Grey => violations.push(format!("cycle through: {p}")),
                    Color::Black => {}
                }
            } else {
                color[node] = Color::Black;
                stack.pop();
            }
        }
    }

    violations
}
