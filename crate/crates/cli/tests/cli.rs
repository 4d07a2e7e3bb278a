use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;
use tracecbr_core::{load_ontology, Monitor, ScenarioStore, SessionConfig, TraceEvent};

const ONTOLOGY: &str = r#"{"concepts":[
 {"id":"course","label":"Course"},
 {"id":"exercise","label":"Exercise","parents":["course"]},
 {"id":"exercise.hard","label":"Hard exercise","parents":["exercise"]},
 {"id":"forum","label":"Forum"},
 {"id":"attempt_count","label":"Attempts"},
 {"id":"duration_s","label":"Duration"}
]}"#;

fn line(t: u32, subject: &str, object: &str, attempts: f64, duration: f64) -> String {
    format!(
        r#"{{"t":"2024-01-15T10:{:02}:{:02}Z","subject":"{subject}","object":"{object}","quals":[{{"q":"attempt_count","v":{attempts}}},{{"q":"duration_s","v":{duration}}}]}}"#,
        t / 60,
        t % 60
    )
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("ontology.json", ONTOLOGY);
        f.write("scenarios.jsonl", "");
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, content).unwrap();
        p
    }

    fn trace(&self, name: &str, subject: &str, objects: &[&str]) -> PathBuf {
        let body: Vec<String> = objects
            .iter()
            .enumerate()
            .map(|(i, o)| line(i as u32, subject, o, 1.0, 30.0 * (i + 1) as f64))
            .collect();
        self.write(name, &(body.join("\n") + "\n"))
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_with_stdin(args, None)
    }

    fn run_with_stdin(&self, args: &[&str], stdin: Option<&str>) -> Output {
        let mut child = Command::new(env!("CARGO_BIN_EXE_tracecbr"))
            .current_dir(self.dir.path())
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        if let Some(input) = stdin {
            child
                .stdin
                .take()
                .unwrap()
                .write_all(input.as_bytes())
                .unwrap();
        }
        drop(child.stdin.take());
        child.wait_with_output().unwrap()
    }

    fn add(&self, trace: &Path, label: &str, strategy: &str) -> Output {
        self.run(&[
            "scenario",
            "add",
            "--ontology",
            "ontology.json",
            "--scenarios",
            "scenarios.jsonl",
            "--trace",
            trace.to_str().unwrap(),
            "--label",
            label,
            "--strategy",
            strategy,
        ])
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<serde_json::Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn compare_trace_with_itself() {
    let f = Fixture::new();
    f.trace("a.jsonl", "L1", &["course", "exercise", "exercise.hard"]);
    let o = f.run(&[
        "compare",
        "a.jsonl",
        "a.jsonl",
        "--ontology",
        "ontology.json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "{\"measure\":\"ilcss\",\"raw_length\":3,\"normalized\":1.0,\"alignment\":[[0,0],[1,1],[2,2]]}\n"
    );

    let o = f.run(&[
        "compare",
        "a.jsonl",
        "a.jsonl",
        "--ontology",
        "ontology.json",
        "--format",
        "table",
    ]);
    assert!(stdout(&o).contains("normalized\t1\n"), "{}", stdout(&o));
    assert!(stdout(&o).contains("alignment\t0:0 1:1 2:2"));
}

#[test]
fn compare_with_thresholds_and_baselines() {
    let f = Fixture::new();
    f.trace("a.jsonl", "L1", &["course", "exercise", "forum"]);
    f.trace("b.jsonl", "L2", &["exercise", "exercise.hard"]);
    let base = [
        "compare",
        "a.jsonl",
        "b.jsonl",
        "--ontology",
        "ontology.json",
    ];

    let strict = json_lines(&f.run(&base));
    assert_eq!(strict[0]["raw_length"], 0);

    // DS(course, exercise) = DS(exercise, exercise.hard) = 0.5; values differ by 30.
    let mut loose = base.to_vec();
    loose.extend(["--alpha", "0.5", "--delta", "30"]);
    let r = json_lines(&f.run(&loose));
    assert_eq!(r[0]["raw_length"], 2);
    assert_eq!(r[0]["normalized"], 1.0);

    let mut lcss = base.to_vec();
    lcss.extend(["--measure", "lcss"]);
    let r = json_lines(&f.run(&lcss));
    assert_eq!(r[0]["raw_length"], 1);
    assert_eq!(r[0]["normalized"], 0.5);

    let mut dtw = base.to_vec();
    dtw.extend(["--measure", "dtw", "--project", "duration_s"]);
    let r = json_lines(&f.run(&dtw));
    // [30,60,90] vs [30,60]: best path pairs 90 with 60.
    assert_eq!(r[0]["distance"], 30.0);
}

#[test]
fn compare_error_codes() {
    let f = Fixture::new();
    f.trace("a.jsonl", "L1", &["course", "exercise", "forum"]);
    f.trace("b.jsonl", "L2", &["exercise", "exercise.hard"]);

    let o = f.run(&[
        "compare",
        "a.jsonl",
        "b.jsonl",
        "--ontology",
        "missing.json",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));

    let o = f.run(&[
        "compare",
        "a.jsonl",
        "b.jsonl",
        "--ontology",
        "ontology.json",
        "--measure",
        "minkowski",
        "--project",
        "duration_s",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("length mismatch"));

    let o = f.run(&[
        "compare",
        "a.jsonl",
        "b.jsonl",
        "--ontology",
        "ontology.json",
        "--measure",
        "dtw",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = f.run(&[
        "compare",
        "a.jsonl",
        "b.jsonl",
        "--ontology",
        "ontology.json",
        "--alpha",
        "-1",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = f.run(&[
        "compare",
        "a.jsonl",
        "b.jsonl",
        "--ontology",
        "ontology.json",
        "--measure",
        "cosine",
    ]);
    assert_eq!(o.status.code(), Some(2));

    f.write("ghost.jsonl", &line(0, "L1", "ghost", 1.0, 1.0));
    let o = f.run(&[
        "compare",
        "a.jsonl",
        "ghost.jsonl",
        "--ontology",
        "ontology.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("line 1: unknown concept: ghost"),
        "{}",
        stderr(&o)
    );

    f.write("broken.jsonl", "{not json\n");
    let o = f.run(&[
        "compare",
        "a.jsonl",
        "broken.jsonl",
        "--ontology",
        "ontology.json",
    ]);
    assert_eq!(o.status.code(), Some(1));

    f.write(
        "bad_ontology.json",
        r#"{"concepts":[{"id":"a","parents":["b"]},{"id":"b","parents":["a"]}]}"#,
    );
    let o = f.run(&[
        "compare",
        "a.jsonl",
        "a.jsonl",
        "--ontology",
        "bad_ontology.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn watch_with_empty_base_escalates() {
    let f = Fixture::new();
    f.trace("stream.jsonl", "L42", &["course", "exercise", "forum"]);
    let o = f.run(&[
        "watch",
        "stream.jsonl",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 3);
    for l in &lines {
        assert_eq!(l["kind"], "escalate_to_human");
        assert_eq!(l["confidence"], 0.0);
        assert_eq!(l["subject"], "L42");
    }
}

#[test]
fn watch_identity_retrieval_alerts() {
    let f = Fixture::new();
    let risky = f.trace(
        "risky.jsonl",
        "L1",
        &["course", "exercise", "exercise.hard", "forum"],
    );
    let fine = f.trace("fine.jsonl", "L2", &["forum", "forum", "course"]);
    assert_eq!(
        stdout(&f.add(&risky, "dropout", "schedule tutor session")),
        "s1\n"
    );
    assert_eq!(stdout(&f.add(&fine, "success", "keep going")), "s2\n");

    f.trace(
        "stream.jsonl",
        "L42",
        &["course", "exercise", "exercise.hard", "forum"],
    );
    let o = f.run(&[
        "watch",
        "stream.jsonl",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 4);
    let last = lines.last().unwrap();
    assert_eq!(last["kind"], "alert");
    assert_eq!(last["confidence"], 1.0);
    assert_eq!(last["scenario"], "s1");
    assert_eq!(last["strategy"], "schedule tutor session");
    assert_eq!(last["t"], "2024-01-15T10:00:03Z");
}

#[test]
fn watch_matches_api_replay() {
    let f = Fixture::new();
    let a = f.trace(
        "a.jsonl",
        "P1",
        &["course", "exercise", "exercise.hard", "exercise"],
    );
    let b = f.trace("b.jsonl", "P2", &["forum", "course", "forum"]);
    let c = f.trace("c.jsonl", "P3", &["exercise", "forum", "exercise.hard"]);
    f.add(&a, "dropout", "call learner");
    f.add(&b, "success", "none");
    f.add(&c, "difficulty", "extra exercises");

    let mut stream = Vec::new();
    for (i, o) in [
        "course",
        "exercise",
        "forum",
        "exercise.hard",
        "course",
        "forum",
    ]
    .iter()
    .enumerate()
    {
        stream.push(line(i as u32, "L1", o, 1.0, 30.0));
        stream.push(line(i as u32, "L2", ["forum", "course"][i % 2], 1.0, 30.0));
    }
    let stream_text = stream.join("\n") + "\n";
    f.write("stream.jsonl", &stream_text);

    let flags = [
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
        "--alpha",
        "0.5",
        "--delta",
        "0",
        "-k",
        "2",
        "--theta-alert",
        "0.6",
        "--theta-min",
        "0.2",
    ];
    let mut args = vec!["watch", "stream.jsonl"];
    args.extend(flags);
    let cli = f.run(&args);
    assert_eq!(cli.status.code(), Some(0), "{}", stderr(&cli));

    let ontology = std::sync::Arc::new(
        load_ontology(fs::read(f.path("ontology.json")).unwrap().as_slice()).unwrap(),
    );
    let store = ScenarioStore::open(f.path("scenarios.jsonl"), ontology.clone()).unwrap();
    let config = SessionConfig {
        params: tracecbr_core::SimilarityParams::new(0.5, 0.0, 0.0, None).unwrap(),
        thresholds: tracecbr_core::Thresholds::new(0.6, 0.2).unwrap(),
        k: 2,
        ..SessionConfig::default()
    };
    let mut monitor = Monitor::new(&store, config).unwrap();
    let mut expected = String::new();
    for l in stream_text.as_bytes().lines() {
        let e = TraceEvent::parse_line(&l.unwrap(), &ontology).unwrap();
        let t = e.timestamp;
        expected.push_str(&monitor.process(e).unwrap().decision.to_json_line(&t));
        expected.push('\n');
    }
    assert_eq!(stdout(&cli), expected);

    // Same input through standard input, and again: byte-identical.
    let mut args = vec!["watch", "--follow"];
    args.extend(flags);
    let piped = f.run_with_stdin(&args, Some(&stream_text));
    assert_eq!(stdout(&piped), expected);
    let again = f.run_with_stdin(&args, Some(&stream_text));
    assert_eq!(again.stdout, piped.stdout);
}

#[test]
fn watch_fails_fast_on_bad_line() {
    let f = Fixture::new();
    let body = format!(
        "{}\n{{oops\n{}\n",
        line(0, "L1", "course", 1.0, 1.0),
        line(1, "L1", "course", 1.0, 1.0)
    );
    f.write("stream.jsonl", &body);
    let o = f.run(&[
        "watch",
        "stream.jsonl",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);

    let body = format!(
        "{}\n{}\n",
        line(5, "L1", "course", 1.0, 1.0),
        line(1, "L1", "course", 1.0, 1.0)
    );
    f.write("stream.jsonl", &body);
    let o = f.run(&[
        "watch",
        "stream.jsonl",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("line 2: out-of-order"),
        "{}",
        stderr(&o)
    );

    let o = f.run(&[
        "watch",
        "stream.jsonl",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
        "--theta-min",
        "0.9",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
}

#[test]
fn scenario_add_and_list() {
    let f = Fixture::new();
    let list = [
        "scenario",
        "list",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
    ];
    let o = f.run(&list);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());

    let t = f.trace("t.jsonl", "L1", &["course", "exercise"]);
    let o = f.add(&t, "dropout", "call");
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "s1\n"));
    let o = f.add(&t, "", "call");
    assert_eq!(o.status.code(), Some(2));

    let o = f.run(&[
        "scenario",
        "add",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
        "--trace",
        "t.jsonl",
        "--label",
        "success",
        "--id",
        "s1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duplicate id: s1"));

    let o = f.run(&[
        "scenario",
        "add",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "scenarios.jsonl",
        "--trace",
        "t.jsonl",
        "--label",
        "success",
        "--note",
        "cohort=2023",
    ]);
    assert_eq!(stdout(&o), "s2\n");

    let o = f.run(&list);
    assert_eq!(
        stdout(&o),
        "{\"id\":\"s1\",\"label\":\"dropout\",\"length\":2}\n{\"id\":\"s2\",\"label\":\"success\",\"length\":2}\n"
    );
    let mut table = list.to_vec();
    table.extend(["--format", "table"]);
    assert_eq!(stdout(&f.run(&table)), "s1\tdropout\t2\ns2\tsuccess\t2\n");

    let saved = fs::read_to_string(f.path("scenarios.jsonl")).unwrap();
    assert!(saved
        .lines()
        .nth(1)
        .unwrap()
        .ends_with(r#""notes":{"cohort":"2023"}}"#));
}

#[test]
fn scenario_add_creates_missing_store() {
    let f = Fixture::new();
    let t = f.trace("t.jsonl", "L1", &["course"]);
    let o = f.run(&[
        "scenario",
        "add",
        "--ontology",
        "ontology.json",
        "--scenarios",
        "fresh.jsonl",
        "--trace",
        t.to_str().unwrap(),
        "--label",
        "success",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(f.path("fresh.jsonl").exists());
}
