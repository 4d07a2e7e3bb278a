use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use tracecbr_core::similarity::project;
use tracecbr_core::{
    dtw, ilcss, lcss_classic, load_ontology, minkowski, normalized_similarity, parse_log, Error,
    Measure, Monitor, Ontology, Result, Scenario, ScenarioStore, Trace, TraceEvent,
};

use crate::args::{invalid, AddArgs, CompareArgs, Format, ListArgs, MeasureArg, WatchArgs};

fn write_err(e: std::io::Error) -> Error {
    Error::Io {
        path: None,
        source: e,
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io {
        path: Some(path.to_path_buf()),
        source: e,
    })
}

pub fn read_ontology(path: &Path) -> Result<Arc<Ontology>> {
    let ontology = load_ontology(BufReader::new(open(path)?)).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(Arc::new(ontology))
}

/// A trace file holding at most one subject.
fn read_trace(path: &Path, ontology: &Ontology) -> Result<Trace> {
    let mut traces = parse_log(BufReader::new(open(path)?), ontology)?;
    match traces.len() {
        0 => Ok(Trace::new("")),
        1 => Ok(traces.remove(0)),
        n => Err(invalid(format!(
            "{}: expected one subject, found {n}",
            path.display()
        ))),
    }
}

#[derive(Serialize)]
struct LengthReport {
    measure: Measure,
    raw_length: usize,
    normalized: f64,
}

#[derive(Serialize)]
struct DistanceReport {
    measure: Measure,
    distance: f64,
}

pub fn compare<W: Write>(args: &CompareArgs, out: &mut W) -> Result<()> {
    let params = args.matching.params()?;
    let ontology = read_ontology(&args.ontology)?;
    let a = read_trace(&args.first, &ontology)?;
    let b = read_trace(&args.second, &ontology)?;
    let measure = Measure::from(args.measure);

    let projections = || -> Result<(Vec<f64>, Vec<f64>)> {
        let q = args.project.as_deref().ok_or_else(|| {
            invalid(format!(
                "--measure {measure} needs --project <qualification>"
            ))
        })?;
        ontology.resolve(q)?;
        Ok((project(&a, q), project(&b, q)))
    };

    let line = match args.measure {
        MeasureArg::Ilcss => {
            let report = ilcss(&a, &b, &params, &ontology)?;
            match args.format {
                Format::Jsonl => serde_json::to_string(&report).expect("serializable"),
                Format::Table => {
                    let pairs: Vec<String> = report
                        .alignment
                        .pairs
                        .iter()
                        .map(|(i, j)| format!("{i}:{j}"))
                        .collect();
                    format!(
                        "measure\t{}\nraw_length\t{}\nnormalized\t{}\nalignment\t{}",
                        report.measure,
                        report.raw_length,
                        report.normalized,
                        pairs.join(" ")
                    )
                }
            }
        }
        MeasureArg::Lcss => {
            let objects = |t: &Trace| t.features().map(|f| f.object.clone()).collect::<Vec<_>>();
            let raw = lcss_classic(&objects(&a), &objects(&b));
            let report = LengthReport {
                measure,
                raw_length: raw,
                normalized: normalized_similarity(raw, a.len(), b.len())?,
            };
            match args.format {
                Format::Jsonl => serde_json::to_string(&report).expect("serializable"),
                Format::Table => format!(
                    "measure\t{}\nraw_length\t{}\nnormalized\t{}",
                    report.measure, report.raw_length, report.normalized
                ),
            }
        }
        MeasureArg::Dtw | MeasureArg::Minkowski => {
            let (u, v) = projections()?;
            let distance = if args.measure == MeasureArg::Dtw {
                dtw(&u, &v)?
            } else {
                minkowski(&u, &v, args.p)?
            };
            let report = DistanceReport { measure, distance };
            match args.format {
                Format::Jsonl => serde_json::to_string(&report).expect("serializable"),
                Format::Table => {
                    format!("measure\t{}\ndistance\t{}", report.measure, report.distance)
                }
            }
        }
    };
    writeln!(out, "{line}").map_err(write_err)
}

/// Runs every line through the monitor in input order, one output line per
/// event. Stops at the first bad line.
pub fn watch<R: BufRead, W: Write>(args: &WatchArgs, input: R, out: &mut W) -> Result<()> {
    let config = args.config()?;
    let ontology = read_ontology(&args.ontology)?;
    let store = ScenarioStore::open(&args.scenarios, ontology.clone())?;
    let mut monitor = Monitor::new(&store, config)?;

    if args.format == Format::Table {
        writeln!(
            out,
            "t\tsubject\tkind\tlabel\tconfidence\tscenario\tstrategy"
        )
        .map_err(write_err)?;
    }
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| write_err(e).at_line(lineno))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = TraceEvent::parse_line(&line, &ontology).map_err(|e| e.at_line(lineno))?;
        let t = event.timestamp;
        let step = monitor.process(event).map_err(|e| e.at_line(lineno))?;
        let d = &step.decision;
        match args.format {
            Format::Jsonl => writeln!(out, "{}", d.to_json_line(&t)),
            Format::Table => writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                tracecbr_core::trace::format_timestamp(&t),
                d.subject,
                d.kind.as_str(),
                d.label,
                d.confidence,
                d.scenario.as_deref().unwrap_or("-"),
                d.strategy.as_deref().unwrap_or("-"),
            ),
        }
        .and_then(|_| out.flush())
        .map_err(write_err)?;
    }
    Ok(())
}

pub fn scenario_add<W: Write>(args: &AddArgs, out: &mut W) -> Result<()> {
    let ontology = read_ontology(&args.ontology)?;
    let trace = read_trace(&args.trace, &ontology)?;
    let mut store = ScenarioStore::open_or_create(&args.scenarios, ontology)?;
    let id = args.id.clone().unwrap_or_else(|| store.fresh_id());
    let mut scenario = Scenario::new(id.clone(), args.label.clone(), args.strategy.clone(), trace);
    scenario.notes = args.notes.iter().cloned().collect();
    store.add_scenario(scenario)?;
    writeln!(out, "{id}").map_err(write_err)
}

pub fn scenario_list<W: Write>(args: &ListArgs, out: &mut W) -> Result<()> {
    let ontology = read_ontology(&args.ontology)?;
    let store = ScenarioStore::open(&args.scenarios, ontology)?;
    for s in store.list_scenarios() {
        match args.format {
            Format::Jsonl => writeln!(out, "{}", serde_json::to_string(&s).expect("serializable")),
            Format::Table => writeln!(out, "{}\t{}\t{}", s.id, s.label, s.length),
        }
        .map_err(write_err)?;
    }
    Ok(())
}
