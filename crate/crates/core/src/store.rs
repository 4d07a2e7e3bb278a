//! The scenario base: completed traces with an outcome label and a
//! recommended strategy, persisted as append-only JSONL.
//!
//! Line format, keys in this order:
//! `{"id":..,"label":..,"strategy":..,"events":[..],"notes":{..}}`.
//! `notes` is omitted when empty and its keys are written sorted.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::trace::{validate_trace, Trace, TraceEvent};

/// Conventional outcome labels. The vocabulary is open.
pub mod labels {
    pub const DROPOUT: &str = "dropout";
    pub const DIFFICULTY: &str = "difficulty";
    pub const SUCCESS: &str = "success";
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub label: String,
    pub strategy: String,
    pub trace: Trace,
    pub notes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRecord {
    id: String,
    label: String,
    strategy: String,
    events: Vec<TraceEvent>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    notes: BTreeMap<String, String>,
}

impl Scenario {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        strategy: impl Into<String>,
        trace: Trace,
    ) -> Self {
        Scenario {
            id: id.into(),
            label: label.into(),
            strategy: strategy.into(),
            trace,
            notes: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    pub fn to_json_line(&self) -> String {
        let record = ScenarioRecord {
            id: self.id.clone(),
            label: self.label.clone(),
            strategy: self.strategy.clone(),
            events: self.trace.events().to_vec(),
            notes: self.notes.clone(),
        };
        serde_json::to_string(&record).expect("scenario serialization is infallible")
    }

    /// Parse one JSONL line. Only syntax and trace ordering are checked here;
    /// ontology and store-level rules are checked on insertion.
    pub fn parse_line(line: &str) -> Result<Self> {
        let r: ScenarioRecord =
            serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
        let subject = r
            .events
            .first()
            .map(|e| e.subject.clone())
            .unwrap_or_default();
        Ok(Scenario {
            id: r.id,
            label: r.label,
            strategy: r.strategy,
            trace: Trace::from_events_unchecked(subject, r.events),
            notes: r.notes,
        })
    }

    fn violations(&self, ontology: &Ontology) -> Vec<String> {
        let mut v = Vec::new();
        if self.id.is_empty() {
            v.push("scenario id is empty".to_string());
        }
        if self.label.is_empty() {
            v.push(format!("scenario {}: label is empty", self.id));
        }
        if self.trace.is_empty() {
            v.push(format!("scenario {}: trace is empty", self.id));
        }
        v.extend(
            validate_trace(&self.trace, ontology)
                .into_iter()
                .map(|s| format!("scenario {}: {s}", self.id)),
        );
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub label: String,
    pub length: usize,
}

#[derive(Debug, Clone)]
pub struct ScenarioStore {
    ontology: Arc<Ontology>,
    scenarios: Vec<Scenario>,
    by_id: HashMap<String, usize>,
    dimension: Option<usize>,
    path: Option<PathBuf>,
}

impl ScenarioStore {
    /// An empty store with no backing file.
    pub fn in_memory(ontology: Arc<Ontology>) -> Self {
        ScenarioStore {
            ontology,
            scenarios: Vec::new(),
            by_id: HashMap::new(),
            dimension: None,
            path: None,
        }
    }

    /// Load every scenario from a JSONL stream without attaching a file.
    pub fn from_reader<R: BufRead>(reader: R, ontology: Arc<Ontology>) -> Result<Self> {
        let mut store = ScenarioStore::in_memory(ontology);
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(None, e).at_line(lineno))?;
            if line.trim().is_empty() {
                continue;
            }
            let sc = Scenario::parse_line(&line).map_err(|e| e.at_line(lineno))?;
            store.insert(sc).map_err(|e| e.at_line(lineno))?;
        }
        Ok(store)
    }

    /// Open an existing scenario file.
    pub fn open(path: impl AsRef<Path>, ontology: Arc<Ontology>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        let mut store = Self::from_reader(BufReader::new(file), ontology)?;
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    /// Open `path`, creating an empty file if it does not exist.
    pub fn open_or_create(path: impl AsRef<Path>, ontology: Arc<Ontology>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            File::create(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        }
        Self::open(path, ontology)
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Dimension shared by all scenarios; `None` for an empty store.
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn get_scenario(&self, id: &str) -> Result<&Scenario> {
        self.by_id
            .get(id)
            .map(|&i| &self.scenarios[i])
            .ok_or_else(|| Error::NotFound(format!("scenario {id}")))
    }

    pub fn list_scenarios(&self) -> Vec<ScenarioSummary> {
        self.scenarios
            .iter()
            .map(|s| ScenarioSummary {
                id: s.id.clone(),
                label: s.label.clone(),
                length: s.len(),
            })
            .collect()
    }

    /// Next free id: `"s"` followed by one more than the largest numeric
    /// suffix among ids of the form `s<digits>`.
    pub fn fresh_id(&self) -> String {
        let max = self
            .scenarios
            .iter()
            .filter_map(|s| s.id.strip_prefix('s'))
            .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            .filter_map(|rest| rest.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        format!("s{}", max + 1)
    }

    fn check(&self, sc: &Scenario) -> Result<()> {
        if self.by_id.contains_key(&sc.id) {
            return Err(Error::DuplicateId(sc.id.clone()));
        }
        let violations = sc.violations(&self.ontology);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        if let (Some(expected), Some(found)) = (self.dimension, sc.trace.dimension()) {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok(())
    }

    fn insert(&mut self, sc: Scenario) -> Result<()> {
        self.check(&sc)?;
        self.dimension = self.dimension.or(sc.trace.dimension());
        self.by_id.insert(sc.id.clone(), self.scenarios.len());
        self.scenarios.push(sc);
        Ok(())
    }

    /// Validate and add a scenario, appending one line to the backing file
    /// when one is attached.
    pub fn add_scenario(&mut self, sc: Scenario) -> Result<()> {
        self.check(&sc)?;
        if let Some(path) = &self.path {
            append_line(path, &sc.to_json_line())?;
        }
        self.insert(sc)
    }

    /// Serialize the whole store as JSONL.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for sc in &self.scenarios {
            writeln!(out, "{}", sc.to_json_line()).map_err(|e| Error::io(None, e))?;
        }
        Ok(())
    }
}

/// Append `line` in a single write, first terminating an unterminated last
/// line if needed.
fn append_line(path: &Path, line: &str) -> Result<()> {
    let io_err = |e| Error::io(path.to_path_buf(), e);
    let mut file = OpenOptions::new()
        .read(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let len = file.metadata().map_err(io_err)?.len();
    let mut buf = String::with_capacity(line.len() + 2);
    if len > 0 {
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1)).map_err(io_err)?;
        file.read_exact(&mut last).map_err(io_err)?;
        if last[0] != b'\n' {
            buf.push('\n');
        }
    }
    buf.push_str(line);
    buf.push('\n');
    file.write_all(buf.as_bytes()).map_err(io_err)?;
    file.sync_data().map_err(io_err)
}
