//! Timestamped semantic-feature sequences and their JSONL ingestion.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qualifier {
    pub q: String,
    pub v: f64,
}

/// One observation: an object concept plus `d >= 1` (qualification, value) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticFeature {
    pub object: String,
    pub quals: Vec<Qualifier>,
}

impl SemanticFeature {
    pub fn new<O, Q>(object: O, quals: impl IntoIterator<Item = (Q, f64)>) -> Self
    where
        O: Into<String>,
        Q: Into<String>,
    {
        SemanticFeature {
            object: object.into(),
            quals: quals
                .into_iter()
                .map(|(q, v)| Qualifier { q: q.into(), v })
                .collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.quals.len()
    }

    /// Structural checks that do not need an ontology.
    pub fn check_shape(&self) -> Result<()> {
        if self.quals.is_empty() {
            return Err(Error::Invalid(vec![
                "semantic feature needs at least one qualification".into(),
            ]));
        }
        if let Some(q) = self.quals.iter().find(|q| !q.v.is_finite()) {
            return Err(Error::Invalid(vec![format!(
                "non-finite value for qualification {}",
                q.q
            )]));
        }
        Ok(())
    }

    pub fn check_concepts(&self, ontology: &Ontology) -> Result<()> {
        ontology.resolve(&self.object)?;
        for q in &self.quals {
            ontology.resolve(&q.q)?;
        }
        Ok(())
    }

    /// Value of the first qualification named `q`, if present.
    pub fn value_of(&self, q: &str) -> Option<f64> {
        self.quals.iter().find(|x| x.q == q).map(|x| x.v)
    }
}

/// Wire form of an event line; field order is the serialization order.
#[derive(Serialize, Deserialize)]
struct EventRecord {
    t: String,
    subject: String,
    object: String,
    quals: Vec<Qualifier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EventRecord", try_from = "EventRecord")]
pub struct TraceEvent {
    pub timestamp: DateTime<Utc>,
    pub subject: String,
    pub feature: SemanticFeature,
}

impl TraceEvent {
    pub fn new(
        timestamp: DateTime<Utc>,
        subject: impl Into<String>,
        feature: SemanticFeature,
    ) -> Self {
        TraceEvent {
            timestamp,
            subject: subject.into(),
            feature,
        }
    }

    pub fn dimension(&self) -> usize {
        self.feature.dimension()
    }

    /// Single-line JSON encoding, without trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serialization is infallible")
    }

    /// Parse one JSONL line and check its concepts against `ontology`.
    pub fn parse_line(line: &str, ontology: &Ontology) -> Result<Self> {
        let event: TraceEvent =
            serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
        event.feature.check_shape()?;
        event.feature.check_concepts(ontology)?;
        Ok(event)
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

impl From<TraceEvent> for EventRecord {
    fn from(e: TraceEvent) -> Self {
        EventRecord {
            t: format_timestamp(&e.timestamp),
            subject: e.subject,
            object: e.feature.object,
            quals: e.feature.quals,
        }
    }
}

impl TryFrom<EventRecord> for TraceEvent {
    type Error = String;

    fn try_from(r: EventRecord) -> std::result::Result<Self, String> {
        let timestamp = DateTime::parse_from_rfc3339(&r.t)
            .map_err(|e| format!("bad timestamp {:?}: {e}", r.t))?
            .with_timezone(&Utc);
        Ok(TraceEvent {
            timestamp,
            subject: r.subject,
            feature: SemanticFeature {
                object: r.object,
                quals: r.quals,
            },
        })
    }
}

/// Chronologically ordered events of one subject, all with the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    subject: String,
    dimension: Option<usize>,
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(subject: impl Into<String>) -> Self {
        Trace {
            subject: subject.into(),
            dimension: None,
            events: Vec::new(),
        }
    }

    /// Build by appending each event in turn.
    pub fn from_events(
        subject: impl Into<String>,
        events: impl IntoIterator<Item = TraceEvent>,
    ) -> Result<Self> {
        let mut t = Trace::new(subject);
        for e in events {
            t.append_event(e)?;
        }
        Ok(t)
    }

    /// Build without checking any invariant. Use [`validate_trace`] to
    /// inspect the result.
    pub fn from_events_unchecked(subject: impl Into<String>, events: Vec<TraceEvent>) -> Self {
        Trace {
            subject: subject.into(),
            dimension: events.first().map(TraceEvent::dimension),
            events,
        }
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    /// Qualification count shared by every event; `None` until the first event.
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn features(&self) -> impl ExactSizeIterator<Item = &SemanticFeature> + '_ {
        self.events.iter().map(|e| &e.feature)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Check that `e` may be appended, without appending it.
    pub fn check_append(&self, e: &TraceEvent) -> Result<()> {
        if e.subject != self.subject {
            return Err(Error::SubjectMismatch {
                expected: self.subject.clone(),
                found: e.subject.clone(),
            });
        }
        e.feature.check_shape()?;
        if let Some(d) = self.dimension {
            if e.dimension() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: e.dimension(),
                });
            }
        }
        if let Some(last) = self.events.last() {
            if e.timestamp < last.timestamp {
                return Err(Error::OutOfOrder {
                    last: format_timestamp(&last.timestamp),
                    found: format_timestamp(&e.timestamp),
                });
            }
        }
        Ok(())
    }

    /// Append `e` as the newest event. On error the trace is unchanged.
    pub fn append_event(&mut self, e: TraceEvent) -> Result<()> {
        self.check_append(&e)?;
        self.dimension.get_or_insert(e.dimension());
        self.events.push(e);
        Ok(())
    }

    /// Non-mutating variant of [`Trace::append_event`].
    pub fn with_event(&self, e: TraceEvent) -> Result<Trace> {
        let mut t = self.clone();
        t.append_event(e)?;
        Ok(t)
    }
}

/// All invariant violations of `t` against `ontology`, one string each.
pub fn validate_trace(t: &Trace, ontology: &Ontology) -> Vec<String> {
    let mut violations = Vec::new();
    let d = t.events.first().map(TraceEvent::dimension);
    for (i, e) in t.events.iter().enumerate() {
        if e.subject != t.subject {
            violations.push(format!(
                "event {i}: subject {} differs from {}",
                e.subject, t.subject
            ));
        }
        if e.feature.quals.is_empty() {
            violations.push(format!("event {i}: no qualifications"));
        }
        if let Some(d) = d {
            if e.dimension() != d {
                violations.push(format!(
                    "event {i}: dimension {} differs from {d}",
                    e.dimension()
                ));
            }
        }
        if i > 0 && e.timestamp < t.events[i - 1].timestamp {
            violations.push(format!("event {i}: timestamp earlier than event {}", i - 1));
        }
        if !ontology.contains(&e.feature.object) {
            violations.push(format!("event {i}: unknown object {}", e.feature.object));
        }
        for q in &e.feature.quals {
            if !ontology.contains(&q.q) {
                violations.push(format!("event {i}: unknown qualification {}", q.q));
            }
            if !q.v.is_finite() {
                violations.push(format!("event {i}: non-finite value for {}", q.q));
            }
        }
    }
    violations
}

/// Read an event JSONL stream into one trace per subject.
///
/// Traces come back in order of each subject's first appearance. Events are
/// sorted by timestamp, ties keeping input order. Blank lines are skipped.
pub fn parse_log<R: BufRead>(stream: R, ontology: &Ontology) -> Result<Vec<Trace>> {
    let mut groups: Vec<(String, usize, Vec<TraceEvent>)> = Vec::new();
    let mut by_subject: HashMap<String, usize> = HashMap::new();

    for (i, line) in stream.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(None, e).at_line(lineno))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = TraceEvent::parse_line(&line, ontology).map_err(|e| e.at_line(lineno))?;
        let slot = *by_subject.entry(event.subject.clone()).or_insert_with(|| {
            groups.push((event.subject.clone(), event.dimension(), Vec::new()));
            groups.len() - 1
        });
        let (_, d, events) = &mut groups[slot];
        if event.dimension() != *d {
            return Err(Error::DimensionMismatch {
                expected: *d,
                found: event.dimension(),
            }
            .at_line(lineno));
        }
        events.push(event);
    }

    Ok(groups
        .into_iter()
        .map(|(subject, _, mut events)| {
            events.sort_by_key(|e| e.timestamp);
            Trace::from_events_unchecked(subject, events)
        })
        .collect())
}

/// Write traces as event JSONL, one line per event, trace by trace.
pub fn write_log<'a, W: Write>(
    traces: impl IntoIterator<Item = &'a Trace>,
    mut out: W,
) -> Result<()> {
    for t in traces {
        for e in &t.events {
            writeln!(out, "{}", e.to_json_line()).map_err(|e| Error::io(None, e))?;
        }
    }
    Ok(())
}
