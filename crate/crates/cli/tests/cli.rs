use jsonschema::JSONSchema;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypersol"))
}

fn schema() -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&schema).expect("schema compiles")
}

struct Run {
    code: i32,
    dir: PathBuf,
    report: Value,
    text: String,
}

fn run(args: &[&str], dir: &Path) -> Run {
    let out = bin().args(args).arg("--out").arg(dir).output().expect("binary runs");
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap_or_default();
    let report = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).expect("report is JSON") };
    Run { code: out.status.code().expect("exit code"), dir: dir.to_path_buf(), report, text }
}

fn validated(r: &Run) -> &Value {
    let schema = schema();
    if let Err(errors) = schema.validate(&r.report) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("report fails the schema: {msgs:?}");
    }
    &r.report
}

fn csv_header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn solve_writes_report_and_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["solve", "--N", "3", "--p", "3", "--lambda", "1/2", "--nodes", "1"], tmp.path());
    assert_eq!(r.code, 0);
    let rep = validated(&r);
    assert_eq!(rep["status"], "ok");
    assert_eq!(rep["result"]["node_count"], 1);
    assert_eq!(rep["result"]["classification"], "decaying-solution");
    assert_eq!(rep["config"]["lambda"], "1/2");
    assert!(rep["result"]["energy"].as_f64().unwrap() > 0.0);
    assert_eq!(csv_header(&r.dir.join("profile.csv")), "t,u,u_prime");
}

#[test]
fn reports_are_deterministic_apart_from_the_timestamp() {
    let strip = |r: &Run| {
        let mut v = r.report.clone();
        v["timestamp"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    let args = ["map-hsm", "--n", "6", "--k", "3", "--eta", "0", "--t", "1", "--seed", "7", "--samples", "50"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run(&args, a.path()), run(&args, b.path()));
    assert_eq!(ra.code, 0);
    assert_eq!(strip(&ra), strip(&rb));
    let lines = |r: &Run| r.text.lines().filter(|l| !l.contains("\"timestamp\"")).map(String::from).collect::<Vec<_>>();
    assert_eq!(lines(&ra), lines(&rb));
    let samples = |d: &Path| std::fs::read(d.join("samples.csv")).unwrap();
    assert_eq!(samples(a.path()), samples(b.path()));
}

#[test]
fn map_hsm_gives_the_expected_hyperbolic_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["map-hsm", "--n", "6", "--k", "3", "--eta", "0", "--t", "1", "--samples", "60"], tmp.path());
    assert_eq!(r.code, 0);
    let rep = validated(&r);
    let mapped = &rep["result"]["mapped"];
    assert_eq!(mapped["N"], 4);
    assert_eq!(mapped["p"], "3/2");
    assert_eq!(mapped["lambda"], "2");
    assert!(rep["result"]["samples"]["max_relative_residual"].as_f64().unwrap() < 1e-4);
    assert_eq!(csv_header(&r.dir.join("samples.csv")), "y1,y2,y3,z1,z2,z3,value");
}

#[test]
fn map_hsm_reuses_a_stored_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let solved = tmp.path().join("solve");
    let r = run(&["solve", "--N", "4", "--p", "3/2", "--lambda", "2"], &solved);
    assert_eq!(r.code, 0);
    let stored = solved.join("report.json");
    let stored = stored.to_str().unwrap();
    let m = run(&["map-hsm", "--n", "6", "--k", "3", "--eta", "0", "--t", "1", "--samples", "30", "--from-solution", stored],
        &tmp.path().join("map"));
    assert_eq!(m.code, 0);
    assert_eq!(validated(&m)["result"]["solution"]["s"], r.report["result"]["s"]);

    let other = run(&["solve", "--N", "3", "--p", "3", "--lambda", "1/2"], &tmp.path().join("other"));
    let path = other.dir.join("report.json");
    let bad = run(&["map-hsm", "--n", "6", "--k", "3", "--eta", "0", "--t", "1", "--from-solution", path.to_str().unwrap()],
        &tmp.path().join("bad"));
    assert_eq!(bad.code, 2);
}

#[test]
fn map_grushin_uses_the_mapped_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["map-grushin", "--alpha", "1", "--k", "1", "--h", "3", "--samples", "40"], tmp.path());
    assert_eq!(r.code, 0);
    let rep = validated(&r);
    assert_eq!(rep["result"]["mapped"]["N"], 4);
    assert_eq!(rep["result"]["mapped"]["lambda"], "35/16");
    assert!(rep["result"]["samples"]["max_relative_residual"].as_f64().unwrap() < 1e-4);
}

#[test]
fn invalid_input_exits_2_with_an_error_report() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["solve", "--N", "3", "--p", "9", "--lambda", "1"], tmp.path());
    assert_eq!(r.code, 2);
    let rep = validated(&r);
    assert_eq!(rep["status"], "error");
    assert_eq!(rep["error"]["exit_code"], 2);

    let borderline = run(&["solve", "--N", "3", "--p", "3", "--lambda", "1"], &tmp.path().join("b"));
    assert_eq!(borderline.code, 2);
    assert_eq!(validated(&borderline)["error"]["kind"], "Borderline");

    let hsm = run(&["map-hsm", "--n", "4", "--k", "2", "--eta", "0", "--t", "1"], &tmp.path().join("h"));
    assert_eq!(hsm.code, 2);

    let missing = bin().args(["solve", "--N", "3", "--p", "3"]).arg("--out").arg(tmp.path().join("m")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("lambda"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"N": 3, "p": 3, "lambda": "1/2", "nodes": 2}"#).unwrap();
    let r = run(&["solve", "--config", cfg.to_str().unwrap(), "--nodes", "1"], &tmp.path().join("o"));
    assert_eq!(r.code, 0, "{}", r.text);
    assert_eq!(validated(&r)["result"]["node_count"], 1);

    std::fs::write(&cfg, r#"{"N": 3, "bogus": 1}"#).unwrap();
    let bad = bin().args(["solve", "--config", cfg.to_str().unwrap()]).arg("--out").arg(tmp.path().join("x")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn nonexistence_scan_reports_none_found() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["nonexistence", "--N", "3", "--p", "5", "--lambda", "1/2", "--grid", "24"], tmp.path());
    assert_eq!(r.code, 0);
    let rep = validated(&r);
    assert_eq!(rep["status"], "none-found");
    assert_eq!(rep["result"]["decaying_sign_changing"], 0);
    assert_eq!(csv_header(&r.dir.join("table.csv")), "s,classification,node_count,energy");

    let sub = run(&["nonexistence", "--N", "3", "--p", "3", "--lambda", "1/2"], &tmp.path().join("s"));
    assert_eq!(sub.code, 2);
}

#[test]
fn scan_lists_node_transitions() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["scan", "--N", "3", "--p", "3", "--lambda", "1/2", "--s-max", "1e3", "--grid", "40"], tmp.path());
    assert_eq!(r.code, 0);
    let rep = validated(&r);
    assert_eq!(rep["result"]["entries"].as_array().unwrap().len(), 40);
    assert!(!rep["result"]["transitions"].as_array().unwrap().is_empty());
}

#[test]
fn estimate_and_decay_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let b = run(&["verify-bubbles", "--N", "5"], &tmp.path().join("b"));
    assert_eq!(b.code, 0);
    assert_eq!(validated(&b)["result"]["all_within_tolerance"], true);
    assert_eq!(csv_header(&b.dir.join("slopes.csv")), "estimate,predicted,slope,std_error,applicable,within_tolerance");

    let d = run(&["verify-decay", "--N", "3", "--p", "3", "--lambda", "1/2", "--nodes", "2"], &tmp.path().join("d"));
    assert_eq!(d.code, 0);
    assert_eq!(validated(&d)["result"]["passed"], true);
}

#[test]
fn sobolev_and_ps_demo_produce_valid_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let s = run(&["sobolev", "--N", "3", "--p", "3", "--lambda", "1/2"], &tmp.path().join("s"));
    assert_eq!(s.code, 0);
    validated(&s);

    let p = run(&["ps-demo", "--N", "4", "--p", "3", "--lambda", "11/5", "--epsilons", "1e-2,1e-3"], &tmp.path().join("p"));
    assert_eq!(p.code, 0);
    let rep = validated(&p);
    assert_eq!(rep["result"]["bubbles_included"], true);
    let rows = std::fs::read_to_string(p.dir.join("quantization.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4 + 2);
}
