use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stpindex::fixtures;
use stpindex::formats::write_events;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stpindex"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("tiny.conf");
    let body = format!(
        "num_objects = 120\nwidth_cells = 6\nheight_cells = 6\nduration = 30\nquery_count = 8\npredicates_per_query_max = 3\n{extra}"
    );
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn sample_log_is_the_fixture() {
    let mut buf = Vec::new();
    write_events(&mut buf, &fixtures::sample_log()).unwrap();
    assert_eq!(std::fs::read_to_string(data("sample_events.csv")).unwrap(), String::from_utf8(buf).unwrap());
}

#[test]
fn sample_queries_on_every_backend() {
    for backend in ["list", "primitive", "advanced"] {
        let cfg = data("sample.conf");
        let log = data("sample_events.csv");
        let q = data("sample_queries.txt");
        let o = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--backend",
            backend,
            "query",
            "--log",
            log.to_str().unwrap(),
            "--queries",
            q.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{backend}: {}", stderr(&o));
        let lines: Vec<String> = stdout(&o).lines().map(|l| l.split(" io=").next().unwrap().to_string()).collect();
        assert_eq!(lines, vec!["O2", "O2,O3", "O1,O2"], "{backend}");
        assert!(stdout(&o).lines().all(|l| l.contains(" io=")));
    }
}

#[test]
fn empty_query_file_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("empty.txt");
    std::fs::write(&q, "").unwrap();
    let cfg = data("sample.conf");
    let log = data("sample_events.csv");
    let o = run(&["--config", cfg.to_str().unwrap(), "query", "--log", log.to_str().unwrap(), "--queries", q.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
}

#[test]
fn malformed_predicate_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("bad.txt");
    std::fs::write(&q, "TIME (1,0)@[6,8]\nTIME (1,0)@x\n").unwrap();
    let cfg = data("sample.conf");
    let log = data("sample_events.csv");
    let o = run(&["--config", cfg.to_str().unwrap(), "query", "--log", log.to_str().unwrap(), "--queries", q.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2") && stderr(&o).contains("column 12"), "{}", stderr(&o));
}

#[test]
fn alternation_violation_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.csv");
    std::fs::write(&log, "t,object_id,cell_col,cell_row,kind\n1,1,0,0,E\n2,1,0,0,E\n").unwrap();
    let cfg = data("sample.conf");
    let o = run(&["--config", cfg.to_str().unwrap(), "build", "--log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn primitive_cap_refuses_with_explanation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("capped.conf");
    std::fs::write(&cfg, "width_cells = 3\nheight_cells = 1\nprimitive_max_events = 4\n").unwrap();
    let log = data("sample_events.csv");
    let o = run(&["--config", cfg.to_str().unwrap(), "--backend", "primitive", "build", "--log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("capped at 4"), "{}", stderr(&o));
}

#[test]
fn build_reports_cells_and_total() {
    let cfg = data("sample.conf");
    let log = data("sample_events.csv");
    let o = run(&["--config", cfg.to_str().unwrap(), "--backend", "list", "build", "--log", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("cell_col,cell_row,pages,writes\n"));
    assert_eq!(out.lines().count(), 5);
    assert!(out.contains("pages_total=3"), "{out}");
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = run(&["--config", cfg.to_str().unwrap(), "--seed", "9", "generate", "--out-dir", d.to_str().unwrap(), "--trajectories"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let summary = stdout(&o);
        let events = std::fs::read_to_string(d.join("events.csv")).unwrap().lines().count() - 1;
        let queries = std::fs::read_to_string(d.join("queries.txt")).unwrap().lines().count();
        assert!(summary.contains(&format!("events={events} ")), "{summary}");
        assert!(summary.contains(&format!("queries={queries} ")), "{summary}");
        let samples = std::fs::read_to_string(d.join("trajectories.csv")).unwrap().lines().count() - 1;
        assert_eq!(samples, 120 * 30);
    }
    for f in ["events.csv", "queries.txt", "trajectories.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn generated_files_round_trip_through_query() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let log = dir.path().join("events.csv");
    let q = dir.path().join("queries.txt");
    let answers: Vec<Vec<String>> = ["list", "primitive", "advanced"]
        .iter()
        .map(|b| {
            let o = run(&["--config", cfg.to_str().unwrap(), "--backend", b, "query", "--log", log.to_str().unwrap(), "--queries", q.to_str().unwrap()]);
            assert!(o.status.success(), "{}", stderr(&o));
            stdout(&o).lines().map(|l| l.split("io=").next().unwrap().to_string()).collect()
        })
        .collect();
    assert_eq!(answers[0].len(), 8);
    assert_eq!(answers[0], answers[1]);
    assert_eq!(answers[1], answers[2]);
}

#[test]
fn zero_objects_is_graceful() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "num_objects = 0\n");
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("events=0"));
    assert_eq!(std::fs::read_to_string(dir.path().join("events.csv")).unwrap(), "t,object_id,cell_col,cell_row,kind\n");
}

#[test]
fn bench_csv_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let mut outputs = Vec::new();
    for sub in ["one", "two"] {
        let out = dir.path().join(sub);
        let o = run(&["--config", cfg.to_str().unwrap(), "bench", "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(out);
    }
    let bench = std::fs::read_to_string(outputs[0].join("bench.csv")).unwrap();
    let mut lines = bench.lines();
    assert!(lines.next().unwrap().starts_with("# stpindex "));
    assert_eq!(lines.next().unwrap(), "backend,query_id,output_size,reads,writes,pages_total");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 8);
    let sizes: Vec<u64> = rows.iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    let space = std::fs::read_to_string(outputs[0].join("space.csv")).unwrap();
    assert_eq!(space.lines().nth(1).unwrap(), "backend,pages_total,structure_a_pages,structure_b_pages,events,build_writes");
    assert_eq!(space.lines().count(), 5);
    assert!(std::fs::read_to_string(outputs[0].join("plot.gp")).unwrap().contains("bench.csv"));
    for f in ["bench.csv", "space.csv", "predicates.csv", "plot.gp"] {
        assert_eq!(std::fs::read(outputs[0].join(f)).unwrap(), std::fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "num_objects = 10\nzipf_skew = steep\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("zipf_skew") && stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--backend", "btree", "build", "--log", "x"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
