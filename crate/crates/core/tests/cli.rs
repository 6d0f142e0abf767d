use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn arealaw(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arealaw"));
    cmd.args(args).env_remove("AREALAW_STATE_DIM_LIMIT").env_remove("AREALAW_HAAR_DIM_LIMIT");
    cmd
}

fn run(args: &[&str]) -> Output {
    arealaw(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn area_single_loop_with_bruteforce() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["area", "-g", p(&fixture("single_loop.json")), "--bruteforce", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("X = 1"));
    assert!(stdout(&o).contains("flow = area: OK"));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["flow"]["X"], 1);
    assert_eq!(r["bruteforce"]["area"], 1);
    assert_eq!(r["bruteforce"]["equal"], true);
}

#[test]
fn area_black_hole() {
    let o = run(&["area", "-g", p(&fixture("blackhole_adapted.json")), "--bruteforce"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("X = 2"));
    assert!(stdout(&o).contains("[tied]"));
}

#[test]
fn area_limit_exit_three_and_flow_only() {
    let o = run(&["area", "-g", p(&fixture("large.json")), "--bruteforce"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--flow-only"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["area", "-g", p(&fixture("large.json")), "--bruteforce", "--flow-only", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["flow"]["X"], 15);
    assert!(r["bruteforce"]["area"].is_null());
    assert!(r["bruteforce"]["skipped"].is_string());
}

#[test]
fn predict_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");

    let o = run(&["predict", "-g", p(&fixture("adapted.json")), "-N", "3", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["prediction"]["case"], "adapted");
    assert_eq!(r["prediction"]["exact"], true);
    assert!((r["prediction"]["value_nats"].as_f64().unwrap() - 5.0 * 3f64.ln()).abs() < 1e-12);

    run(&["predict", "-g", p(&fixture("single_loop.json")), "-N", "10", "--out", p(&out)]);
    let r = report(&out);
    assert!((r["prediction"]["value_nats"].as_f64().unwrap() - (10f64.ln() - 0.5)).abs() < 1e-12);

    let o = run(&["predict", "-g", p(&fixture("generic.json")), "-N", "4", "--bits", "--out", p(&out)]);
    assert!(stdout(&o).contains("correction: unknown"));
    assert!(stdout(&o).contains("6.000000 bits"));
    let r = report(&out);
    assert_eq!(r["prediction"]["case"], "generic");
    assert!(r["prediction"]["correction_nats"].is_null());
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let cases = [
        write("garbage.json", "{ not json"),
        write("no_trace.json", r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":1}]}"#),
        write("range.json", r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":1}],"trace":{"mode":"counts","s":{"V":3}}}"#),
        write("unknown.json", r#"{"vertices":["V"],"edges":[{"u":"V","v":"W","d":1}],"trace":{"mode":"legs","traced":[]}}"#),
        write("ratio.json", r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":0}],"trace":{"mode":"legs","traced":[]}}"#),
    ];
    for path in &cases {
        let o = run(&["predict", "-g", p(path), "-N", "4"]);
        assert_eq!(o.status.code(), Some(2), "{}", path.display());
    }
    let o = run(&["predict", "-g", p(&dir.path().join("missing.json")), "-N", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["predict", "-g", p(&fixture("single_loop.json")), "-N", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    let g = fixture("blackhole2.json");
    for out in [&a, &b] {
        let o = run(&["simulate", "-g", p(&g), "-N", "6", "-n", "5", "--seed", "7", "--out", p(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = run(&["simulate", "-g", p(&g), "-N", "6", "-n", "2", "--out", p(&c)]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&c);
    let seed = r["input"]["seed"].as_u64().expect("seed recorded");
    assert_eq!(r["mc"]["seed"].as_u64(), Some(seed));

    // the recorded seed reproduces the run
    let d = dir.path().join("d.json");
    run(&["simulate", "-g", p(&g), "-N", "6", "-n", "2", "--seed", &seed.to_string(), "--out", p(&d)]);
    assert_eq!(report(&d)["mc"], r["mc"]);
}

#[test]
fn report_is_self_contained() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    run(&["simulate", "-g", p(&fixture("oxygen2.json")), "-N", "5", "-n", "3", "--seed", "3", "--out", p(&first)]);
    let r = report(&first);
    let graph = dir.path().join("graph.json");
    std::fs::write(&graph, serde_json::to_string(&r["input"]["graph"]).unwrap()).unwrap();
    let i = &r["input"];
    let second = dir.path().join("second.json");
    let (n, samples, seed) = (i["N"].to_string(), i["samples"].to_string(), i["seed"].to_string());
    run(&["simulate", "-g", p(&graph), "-N", &n, "-n", &samples, "--seed", &seed, "--out", p(&second)]);
    assert_eq!(report(&second), r);
}

#[test]
fn spectra_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = run(&["simulate", "-g", p(&fixture("single_loop.json")), "-N", "4", "-n", "3", "--seed", "1", "--spectra", p(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,index,eigenvalue"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn guard_violation_exit_four_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = arealaw(&["simulate", "-g", p(&fixture("blackhole2.json")), "-N", "16", "-n", "2", "--seed", "1", "--out", p(&out)])
        .env("AREALAW_STATE_DIM_LIMIT", "1000")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.exists());

    let o = arealaw(&["transport", "-i", p(&fixture("t_doubled_edge.json")), "--certify"])
        .env("AREALAW_HAAR_DIM_LIMIT", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn verify_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["verify", "-g", p(&fixture("blackhole2.json")), "-N", "16", "-n", "10", "--seed", "7", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(report(&out)["verdict"]["passed"], true);

    let o = run(&["verify", "-g", p(&fixture("adapted.json")), "-N", "2", "-n", "4", "--seed", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"]["stderr_H"].as_f64(), Some(0.0));

    let o = run(&["verify", "-g", p(&fixture("blackhole2.json")), "-N", "8", "-n", "4", "--seed", "7", "--expect", "1.0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));

    let o = run(&["verify", "-g", p(&fixture("generic.json")), "-N", "3", "-n", "4", "--seed", "2", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&out)["verdict"]["check"], "upper_bound");
}

#[test]
fn transport_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let y = |file: &str| {
        let o = run(&["transport", "-i", p(&fixture(file)), "--out", p(&out)]);
        assert_eq!(o.status.code(), Some(0));
        let t = &report(&out)["transport"]["scenarios"];
        (t["Y1"].as_u64().unwrap(), t["Y2"].as_u64().unwrap(), t["Y3"].as_u64().unwrap())
    };
    assert_eq!(y("t_single_edge.json"), (0, 1, 1));
    assert_eq!(y("t_isolated.json"), (0, 2, 0));

    let o = run(&["transport", "-i", p(&fixture("t_doubled_edge.json")), "--certify", "-N", "2", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let c = &report(&out)["transport"]["certificate"];
    assert_eq!(c["rank"], 4);
    assert_eq!(c["passed"], true);

    let o = run(&["transport", "-i", p(&fixture("t_odd.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["transport", "-i", p(&fixture("t_isolated.json")), "--certify"]);
    assert_eq!(o.status.code(), Some(2), "no N available");
}
