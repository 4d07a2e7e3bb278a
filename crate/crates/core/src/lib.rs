//! Trace-based dynamic case-based reasoning.
//!
//! Activity traces are sequences of ontology-grounded semantic features.
//! The engine compares an evolving trace against a base of past scenarios
//! with ILCSS, a longest-common-subsequence variant whose match guard uses
//! semantic distance on concepts and a tolerance on values, and turns the
//! ranking into alerts, recommendations or escalations.

pub mod engine;
pub mod error;
pub mod ontology;
pub mod similarity;
pub mod store;
pub mod trace;

pub use engine::{
    decide, init_session, interpret, retain, CaseBase, Decision, DecisionKind, Interpretation,
    Monitor, Prediction, RankedMatch, Session, SessionConfig, Step, Thresholds,
};
pub use error::{Error, ErrorClass, Result};
pub use ontology::{load_ontology, validate_ontology, Concept, ConceptIdx, Ontology};
pub use similarity::{
    dtw, ilcss, ilcss_features, lcss_classic, minkowski, normalized_similarity, sf_match,
    Alignment, MatchReport, Measure, SimilarityParams,
};
pub use store::{Scenario, ScenarioStore, ScenarioSummary};
pub use trace::{
    parse_log, validate_trace, write_log, Qualifier, SemanticFeature, Trace, TraceEvent,
};
