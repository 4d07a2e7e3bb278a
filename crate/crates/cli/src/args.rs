use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracecbr_core::{Error, Measure, Result, SessionConfig, SimilarityParams, Thresholds};

#[derive(Debug, Parser)]
#[command(
    name = "tracecbr",
    version,
    about = "Trace-based case retrieval and learner follow-up"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare two trace files with one similarity measure.
    Compare(CompareArgs),
    /// Stream events and emit one decision per event.
    Watch(WatchArgs),
    /// Manage the scenario base.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Ilcss,
    Lcss,
    Dtw,
    Minkowski,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Ilcss => Measure::Ilcss,
            MeasureArg::Lcss => Measure::Lcss,
            MeasureArg::Dtw => Measure::Dtw,
            MeasureArg::Minkowski => Measure::Minkowski,
        }
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Object semantic-distance threshold.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Qualification semantic-distance threshold.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Value absolute-difference threshold.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Tail-anchored alignment window; unbounded when omitted.
    #[arg(long)]
    pub epsilon: Option<usize>,
}

impl MatchArgs {
    pub fn params(&self) -> Result<SimilarityParams> {
        SimilarityParams::new(self.alpha, self.beta, self.delta, self.epsilon)
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First trace (event JSONL, one subject).
    pub first: PathBuf,
    /// Second trace (event JSONL, one subject).
    pub second: PathBuf,
    #[arg(long)]
    pub ontology: PathBuf,
    #[arg(long, value_enum, default_value_t = MeasureArg::Ilcss)]
    pub measure: MeasureArg,
    /// Qualification whose values feed dtw and minkowski.
    #[arg(long)]
    pub project: Option<String>,
    /// Minkowski order.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[command(flatten)]
    pub matching: MatchArgs,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    /// Event JSONL file; standard input when omitted.
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub ontology: PathBuf,
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Read events from standard input.
    #[arg(long, conflicts_with = "events")]
    pub follow: bool,
    #[command(flatten)]
    pub matching: MatchArgs,
    /// Ranking depth for retrieval and the label vote.
    #[arg(short, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.7)]
    pub theta_alert: f64,
    #[arg(long, default_value_t = 0.3)]
    pub theta_min: f64,
    /// Label treated as a risk (repeatable). Defaults to dropout and difficulty.
    #[arg(long = "risk")]
    pub risk: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
}

impl WatchArgs {
    pub fn config(&self) -> Result<SessionConfig> {
        let mut config = SessionConfig {
            params: self.matching.params()?,
            thresholds: Thresholds::new(self.theta_alert, self.theta_min)?,
            k: self.k,
            ..SessionConfig::default()
        };
        if !self.risk.is_empty() {
            config.risk_labels = self.risk.iter().cloned().collect();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Validate a trace and append it as a new scenario; prints its id.
    Add(AddArgs),
    /// Print id, label and length of every scenario.
    List(ListArgs),
}

#[derive(Debug, Args)]
pub struct AddArgs {
    #[arg(long)]
    pub ontology: PathBuf,
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Trace to store (event JSONL, one subject).
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub label: String,
    #[arg(long, default_value = "")]
    pub strategy: String,
    /// Explicit id; a fresh `s<N>` id is generated when omitted.
    #[arg(long)]
    pub id: Option<String>,
    /// Metadata entry `key=value` (repeatable).
    #[arg(long = "note", value_parser = parse_note)]
    pub notes: Vec<(String, String)>,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long)]
    pub ontology: PathBuf,
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
}

fn parse_note(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
