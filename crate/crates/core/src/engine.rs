//! Dynamic case-based reasoning over an evolving target trace.
//!
//! Each incoming event runs through four stages: the target case is
//! elaborated incrementally, similar scenarios are retrieved, the ranking is
//! interpreted as a profile label, and a decision is taken. Finished targets
//! can be retained as new scenarios.
//!
//! Elaboration never restarts the comparison. For every scenario the session
//! keeps the last row of the ILCSS table over (target prefix x scenario
//! prefix), and a new event adds one row at a cost of `|scenario|` guard
//! evaluations. When a tail-anchored window is configured the window moves as
//! the target grows, so the session also keeps the guard outcomes and re-runs
//! the integer recurrence over them; guards are still evaluated once per cell.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::similarity::{
    encode_features, ilcss_encoded, EncodedFeature, MatchReport, SimilarityParams,
};
use crate::store::{Scenario, ScenarioStore};
use crate::trace::{format_timestamp, Trace, TraceEvent};

/// Label used when there is nothing to interpret.
pub const UNKNOWN_LABEL: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Minimum confidence for an alert or a recommendation.
    pub alert: f64,
    /// Below this confidence the case is escalated to a human tutor.
    pub min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            alert: 0.7,
            min: 0.3,
        }
    }
}

impl Thresholds {
    pub fn new(alert: f64, min: f64) -> Result<Self> {
        let t = Thresholds { alert, min };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite()
            && self.alert.is_finite()
            && 0.0 <= self.min
            && self.min <= self.alert
            && self.alert <= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy 0 <= theta_min <= theta_alert <= 1, got theta_min={} theta_alert={}",
                self.min, self.alert
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub params: SimilarityParams,
    pub thresholds: Thresholds,
    pub risk_labels: BTreeSet<String>,
    /// Ranking depth used for retrieval and for the label vote.
    pub k: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            params: SimilarityParams::default(),
            thresholds: Thresholds::default(),
            risk_labels: ["dropout", "difficulty"]
                .into_iter()
                .map(String::from)
                .collect(),
            k: 5,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.thresholds.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Case {
    id: String,
    label: String,
    strategy: String,
    events: Vec<TraceEvent>,
    encoded: Vec<EncodedFeature>,
}

/// Read-only, encoded snapshot of a scenario store, shareable between
/// sessions.
#[derive(Debug)]
pub struct CaseBase {
    ontology: Arc<Ontology>,
    dimension: Option<usize>,
    cases: Vec<Case>,
}

impl CaseBase {
    pub fn from_store(store: &ScenarioStore) -> Result<Self> {
        let ontology = store.ontology().clone();
        let mut dimension = None;
        let cases = store
            .scenarios()
            .iter()
            .map(|sc: &Scenario| {
                let encoded = encode_features(sc.trace.features(), dimension, &ontology)?;
                dimension = dimension.or(sc.trace.dimension());
                Ok(Case {
                    id: sc.id.clone(),
                    label: sc.label.clone(),
                    strategy: sc.strategy.clone(),
                    events: sc.trace.events().to_vec(),
                    encoded,
                })
            })
            .collect::<Result<_>>()?;
        Ok(CaseBase {
            ontology,
            dimension,
            cases,
        })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }
}

#[derive(Debug, Clone)]
struct CaseState {
    /// Last prefix-DP row: `row[j]` = ILCSS(target, scenario[..j]).
    row: Vec<u32>,
    /// Guard outcomes, target-major, kept only when a window is configured.
    guards: Vec<bool>,
}

impl CaseState {
    fn raw(&self) -> usize {
        *self.row.last().expect("row has |scenario| + 1 entries") as usize
    }
}

/// One scenario in a ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedMatch {
    pub scenario: String,
    pub label: String,
    pub strategy: String,
    #[serde(flatten)]
    pub report: MatchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interpretation {
    pub label: String,
    pub confidence: f64,
    pub votes: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Alert,
    Recommend,
    EscalateToHuman,
    InsufficientEvidence,
}

impl DecisionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionKind::Alert => "alert",
            DecisionKind::Recommend => "recommend",
            DecisionKind::EscalateToHuman => "escalate_to_human",
            DecisionKind::InsufficientEvidence => "insufficient_evidence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub kind: DecisionKind,
    pub subject: String,
    pub label: String,
    pub confidence: f64,
    pub strategy: Option<String>,
    pub scenario: Option<String>,
}

#[derive(Serialize)]
struct DecisionRecord<'a> {
    t: String,
    subject: &'a str,
    kind: DecisionKind,
    label: &'a str,
    confidence: f64,
    scenario: Option<&'a str>,
    strategy: Option<&'a str>,
}

impl Decision {
    /// One decision line, stamped with the time of the event that produced it.
    pub fn to_json_line(&self, t: &DateTime<Utc>) -> String {
        serde_json::to_string(&DecisionRecord {
            t: format_timestamp(t),
            subject: &self.subject,
            kind: self.kind,
            label: &self.label,
            confidence: self.confidence,
            scenario: self.scenario.as_deref(),
            strategy: self.strategy.as_deref(),
        })
        .expect("decision serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub source: String,
    pub continuation: Vec<TraceEvent>,
}

/// Output of one full pass over a new event.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub ranking: Vec<RankedMatch>,
    pub interpretation: Interpretation,
    pub decision: Decision,
}

/// The evolving target case of one subject and its per-scenario DP state.
#[derive(Debug, Clone)]
pub struct Session {
    cases: Arc<CaseBase>,
    config: SessionConfig,
    target: Option<Trace>,
    encoded_target: Vec<EncodedFeature>,
    states: Vec<CaseState>,
}

/// Start a session over a snapshot of `store`.
pub fn init_session(store: &ScenarioStore, config: SessionConfig) -> Result<Session> {
    Session::new(Arc::new(CaseBase::from_store(store)?), config)
}

impl Session {
    pub fn new(cases: Arc<CaseBase>, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let states = cases
            .cases
            .iter()
            .map(|c| CaseState {
                row: vec![0; c.encoded.len() + 1],
                guards: Vec::new(),
            })
            .collect();
        Ok(Session {
            cases,
            config,
            target: None,
            encoded_target: Vec::new(),
            states,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn case_base(&self) -> &Arc<CaseBase> {
        &self.cases
    }

    pub fn target(&self) -> Option<&Trace> {
        self.target.as_ref()
    }

    pub fn target_len(&self) -> usize {
        self.encoded_target.len()
    }

    /// Current ILCSS length against every scenario, in store order.
    pub fn raw_lengths(&self) -> Vec<(&str, usize)> {
        self.cases
            .cases
            .iter()
            .zip(&self.states)
            .map(|(c, s)| (c.id.as_str(), s.raw()))
            .collect()
    }

    /// The last DP row kept for scenario `index` (store order).
    pub fn dp_row(&self, index: usize) -> &[u32] {
        &self.states[index].row
    }

    /// Extend the target by one event and update every scenario's DP row.
    /// On error the session is unchanged.
    pub fn elaborate(&mut self, e: TraceEvent) -> Result<()> {
        match &self.target {
            Some(t) => t.check_append(&e)?,
            None => Trace::new(e.subject.clone()).check_append(&e)?,
        }
        if let Some(d) = self.cases.dimension {
            if e.dimension() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: e.dimension(),
                });
            }
        }
        let encoded = EncodedFeature::encode(&e.feature, &self.cases.ontology)?;

        let params = self.config.params;
        let ontology = &*self.cases.ontology;
        let n = self.encoded_target.len() + 1;
        self.states
            .par_iter_mut()
            .zip(self.cases.cases.par_iter())
            .for_each(|(state, case)| {
                let scenario = &case.encoded;
                if params.epsilon.is_none() {
                    advance_row(&mut state.row, |j| {
                        encoded.matches(&scenario[j], &params, ontology)
                    });
                } else {
                    state.guards.extend(
                        scenario
                            .iter()
                            .map(|b| encoded.matches(b, &params, ontology)),
                    );
                    windowed_last_row(&mut state.row, &state.guards, n, &params);
                }
            });

        self.encoded_target.push(encoded);
        match &mut self.target {
            Some(t) => t.append_event(e)?,
            None => self.target = Some(Trace::from_events(e.subject.clone(), [e])?),
        }
        Ok(())
    }

    fn ranked_indices(&self) -> Vec<(usize, f64)> {
        let n = self.encoded_target.len();
        let mut scored: Vec<(usize, f64)> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let m = self.cases.cases[i].encoded.len();
                let norm = if n == 0 || m == 0 {
                    0.0
                } else {
                    s.raw() as f64 / n.min(m) as f64
                };
                (i, norm)
            })
            .collect();
        scored.sort_by(|&(a, na), &(b, nb)| {
            nb.total_cmp(&na)
                .then_with(|| self.states[b].raw().cmp(&self.states[a].raw()))
                .then_with(|| self.cases.cases[a].id.cmp(&self.cases.cases[b].id))
        });
        scored
    }

    /// Top-`k` scenarios by normalized similarity, then raw length, then id.
    /// Each entry carries the full alignment against the current target.
    pub fn retrieve(&self, k: usize) -> Vec<RankedMatch> {
        self.ranked_indices()
            .into_iter()
            .take(k)
            .map(|(i, _)| {
                let case = &self.cases.cases[i];
                let report = ilcss_encoded(
                    &self.encoded_target,
                    &case.encoded,
                    &self.config.params,
                    &self.cases.ontology,
                );
                debug_assert_eq!(report.raw_length, self.states[i].raw());
                RankedMatch {
                    scenario: case.id.clone(),
                    label: case.label.clone(),
                    strategy: case.strategy.clone(),
                    report,
                }
            })
            .collect()
    }

    /// Events of the best-ranked scenario after its last aligned position.
    pub fn predict_continuation(&self, ranking: &[RankedMatch]) -> Result<Prediction> {
        let top = ranking
            .first()
            .ok_or(Error::EmptyInput("cannot predict from an empty ranking"))?;
        let case = self
            .cases
            .cases
            .iter()
            .find(|c| c.id == top.scenario)
            .ok_or_else(|| Error::NotFound(format!("scenario {}", top.scenario)))?;
        let start = top.report.alignment.last().map_or(0, |(_, j)| j + 1);
        Ok(Prediction {
            source: case.id.clone(),
            continuation: case.events[start..].to_vec(),
        })
    }

    /// Elaborate, then retrieve, interpret and decide.
    pub fn step(&mut self, e: TraceEvent) -> Result<Step> {
        self.elaborate(e)?;
        let ranking = self.retrieve(self.config.k);
        let interpretation = interpret(&ranking, self.config.k);
        let subject = self.target.as_ref().map_or("", |t| t.subject());
        let decision = decide(
            &interpretation,
            &self.config.thresholds,
            &self.config.risk_labels,
            &ranking,
            subject,
        )?;
        Ok(Step {
            ranking,
            interpretation,
            decision,
        })
    }
}

/// `row` holds DP row `i-1`; overwrite it with row `i`.
#[inline]
fn advance_row(row: &mut [u32], matches: impl Fn(usize) -> bool) {
    let mut diag = row[0];
    for j in 1..row.len() {
        let up = row[j];
        row[j] = if matches(j - 1) {
            diag + 1
        } else {
            up.max(row[j - 1])
        };
        diag = up;
    }
}

/// Recompute the last prefix-DP row over `n` target events from stored
/// guard outcomes, applying the tail-anchored window.
fn windowed_last_row(row: &mut [u32], guards: &[bool], n: usize, params: &SimilarityParams) {
    let m = row.len() - 1;
    row.fill(0);
    for i in 0..n {
        let cells = &guards[i * m..(i + 1) * m];
        advance_row(row, |j| cells[j] && params.in_window(n, m, i, j));
    }
}

/// Majority label among the top `k_vote` entries with positive similarity.
///
/// Ties go to the tied label ranked highest. With no positive entries the
/// label falls back to the top entry's label.
pub fn interpret(ranking: &[RankedMatch], k_vote: usize) -> Interpretation {
    let Some(top) = ranking.first() else {
        return Interpretation {
            label: UNKNOWN_LABEL.to_string(),
            confidence: 0.0,
            votes: BTreeMap::new(),
        };
    };

    let mut votes: BTreeMap<String, usize> = BTreeMap::new();
    for r in ranking
        .iter()
        .take(k_vote)
        .filter(|r| r.report.raw_length > 0)
    {
        *votes.entry(r.label.clone()).or_default() += 1;
    }
    let best = votes.values().copied().max().unwrap_or(0);
    let label = ranking
        .iter()
        .map(|r| &r.label)
        .find(|l| votes.get(*l) == Some(&best))
        .unwrap_or(&top.label)
        .clone();

    Interpretation {
        label,
        confidence: top.report.normalized,
        votes,
    }
}

/// Map an interpretation onto one of the four decision kinds.
pub fn decide(
    interpretation: &Interpretation,
    thresholds: &Thresholds,
    risk_labels: &BTreeSet<String>,
    ranking: &[RankedMatch],
    subject: &str,
) -> Result<Decision> {
    thresholds.validate()?;
    let c = interpretation.confidence;
    let kind = if c >= thresholds.alert {
        if risk_labels.contains(&interpretation.label) {
            DecisionKind::Alert
        } else {
            DecisionKind::Recommend
        }
    } else if c >= thresholds.min {
        DecisionKind::InsufficientEvidence
    } else {
        DecisionKind::EscalateToHuman
    };

    // The best-ranked scenario carrying the decided label backs the decision.
    let backing = ranking
        .iter()
        .find(|r| r.label == interpretation.label)
        .or(ranking.first());
    let strategy = match kind {
        DecisionKind::Alert | DecisionKind::Recommend => backing.map(|r| r.strategy.clone()),
        _ => None,
    };

    Ok(Decision {
        kind,
        subject: subject.to_string(),
        label: interpretation.label.clone(),
        confidence: c,
        strategy,
        scenario: backing.map(|r| r.scenario.clone()),
    })
}

/// Add the session's target to `store` under a fresh id.
pub fn retain(
    store: &mut ScenarioStore,
    session: &Session,
    label: &str,
    strategy: &str,
) -> Result<String> {
    let target = session
        .target()
        .filter(|t| !t.is_empty())
        .ok_or(Error::EmptyInput("cannot retain an empty target"))?;
    let id = store.fresh_id();
    store.add_scenario(Scenario::new(id.clone(), label, strategy, target.clone()))?;
    Ok(id)
}

/// Per-subject sessions over one shared case base, for interleaved streams.
#[derive(Debug)]
pub struct Monitor {
    cases: Arc<CaseBase>,
    config: SessionConfig,
    sessions: HashMap<String, Session>,
}

impl Monitor {
    pub fn new(store: &ScenarioStore, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Monitor {
            cases: Arc::new(CaseBase::from_store(store)?),
            config,
            sessions: HashMap::new(),
        })
    }

    pub fn session(&self, subject: &str) -> Option<&Session> {
        self.sessions.get(subject)
    }

    /// Route `e` to its subject's session and run one full step.
    pub fn process(&mut self, e: TraceEvent) -> Result<Step> {
        if let Some(session) = self.sessions.get_mut(&e.subject) {
            return session.step(e);
        }
        let mut session = Session::new(self.cases.clone(), self.config.clone())?;
        let subject = e.subject.clone();
        let step = session.step(e)?;
        self.sessions.insert(subject, session);
        Ok(step)
    }
}
