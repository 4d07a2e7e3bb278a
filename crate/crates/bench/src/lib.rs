//! Synthetic fixtures for the benchmarks.

use std::sync::Arc;

use chrono::{TimeZone, Utc};
use tracecbr_core::{
    Concept, Ontology, Scenario, ScenarioStore, SemanticFeature, Trace, TraceEvent,
};

/// A two-level ontology: `objects` leaves under one root plus two
/// qualification concepts.
pub fn ontology(objects: usize) -> Arc<Ontology> {
    let mut concepts = vec![Concept::new("root", &[])];
    concepts.extend((0..objects).map(|i| Concept::new(format!("o{i}"), &["root"])));
    concepts.push(Concept::new("q0", &[]));
    concepts.push(Concept::new("q1", &["q0"]));
    Arc::new(Ontology::from_concepts(concepts).expect("fixture ontology is valid"))
}

/// Cheap deterministic pseudo-random sequence (64-bit LCG).
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }
}

pub fn event(subject: &str, second: i64, object: usize, v0: f64, v1: f64) -> TraceEvent {
    TraceEvent::new(
        Utc.timestamp_opt(second, 0).unwrap(),
        subject,
        SemanticFeature::new(format!("o{object}"), [("q0", v0), ("q1", v1)]),
    )
}

/// `count` scenarios of `len` events each, dimension 2.
pub fn store(ontology: Arc<Ontology>, count: usize, len: usize, seed: u64) -> ScenarioStore {
    let objects = ontology.len() - 3;
    let mut rng = Lcg(seed);
    let mut store = ScenarioStore::in_memory(ontology);
    for s in 0..count {
        let subject = format!("L{s}");
        let events = (0..len).map(|i| {
            let o = (rng.next() as usize) % objects;
            event(
                &subject,
                i as i64,
                o,
                (rng.next() % 4) as f64,
                (rng.next() % 4) as f64,
            )
        });
        let trace = Trace::from_events(subject.clone(), events).expect("fixture trace is valid");
        let label = ["dropout", "difficulty", "success"][s % 3];
        store
            .add_scenario(Scenario::new(format!("s{}", s + 1), label, "review", trace))
            .expect("fixture scenario is valid");
    }
    store
}

/// A target stream of `len` events for subject `"target"`.
pub fn stream(objects: usize, len: usize, seed: u64) -> Vec<TraceEvent> {
    let mut rng = Lcg(seed);
    (0..len)
        .map(|i| {
            let o = (rng.next() as usize) % objects;
            event(
                "target",
                i as i64,
                o,
                (rng.next() % 4) as f64,
                (rng.next() % 4) as f64,
            )
        })
        .collect()
}
