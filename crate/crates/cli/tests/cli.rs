use std::path::Path;
use std::process::{Command, Output};

use bosefunc::qfim::closed_form_qfim_n2;
use bosefunc::search::closed_form_n2;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bosefunc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bosefunc")
}

fn run_threads(args: &[&str], threads: &str) -> Output {
    bin().args(args).env("RDMFT_QFI_THREADS", threads).output().expect("spawn bosefunc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().expect("header").split(',').map(str::to_string).collect();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/output-v1.schema.json");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&doc).expect("schema compiles")
}

fn assert_valid(doc: &Value) {
    let v = schema();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

#[test]
fn sweep_matches_closed_form_repulsive() {
    let o = run(&["sweep", "--n", "2", "--sign", "+1", "--grid", "50"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["gamma_x", "gamma_z", "F", "M_xx", "M_yy", "M_zz", "M_xz", "converged"]);
    assert!(!rows.is_empty());
    for r in &rows {
        let v: Vec<f64> = r[..7].iter().map(|c| c.parse().unwrap()).collect();
        assert_eq!(r[7], "true");
        let cf = closed_form_n2(v[0], v[1], 1.0, None).unwrap();
        let m = closed_form_qfim_n2(v[0], v[1], 1.0, None).unwrap();
        // CSV keeps 12 significant digits.
        assert!((v[2] - cf.f_value).abs() < 1e-8, "{r:?}");
        for (got, want) in v[3..7].iter().zip([m.xx(), m.yy(), m.zz(), m.xz()]) {
            assert!((got - want).abs() < 1e-6, "{r:?}");
        }
    }
    // Surface spot values through the same evaluation path.
    for (gamma, want) in [("1,0", 2.0), ("0,1", 0.0)] {
        let doc = json(&run(&["witness", "--n", "2", "--gamma", gamma, "--direction", "0,0,1"]));
        assert!((doc["rows"][0]["qfi"].as_f64().unwrap() - want).abs() < 1e-6, "{gamma}");
    }
}

#[test]
fn attractive_center_is_noon() {
    let o = run(&["sweep", "--n", "2", "--sign", "-1", "--grid", "51", "--strategy", "closed_form", "--format", "json"]);
    assert!(o.status.success());
    let doc = json(&o);
    assert_valid(&doc);
    let center = doc["rows"].as_array().unwrap().iter().find(|r| r["gamma_x"].as_f64().unwrap().abs() < 1e-12 && r["gamma_z"].as_f64().unwrap().abs() < 1e-12);
    let center = center.expect("odd grid contains the origin");
    assert!((center["M_zz"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn smallest_grid() {
    let o = run(&["sweep", "--grid", "2"]);
    assert!(o.status.success());
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
}

#[test]
fn output_file_and_json_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = run(&["sweep", "--grid", "4", "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_valid(&doc);
    let f = text.lines().find(|l| l.trim_start().starts_with("\"F\"")).unwrap();
    let digits = f.split(':').nth(1).unwrap().split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
    assert_eq!(digits, 17, "{f}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "grid = 4\nsign = -1\nformat = json\n").unwrap();
    let doc = json(&run(&["sweep", "--config", cfg.to_str().unwrap(), "--grid", "2"]));
    assert_eq!(doc["config"]["grid"], 2);
    assert_eq!(doc["config"]["sign_or_u"].as_f64(), Some(-1.0));
    assert_eq!(doc["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn deterministic_across_thread_counts() {
    for args in [&["sweep", "--grid", "12", "--sign", "-1", "--seed", "7"][..], &["verify", "--only", "closed_form,generating_relation,witness", "--seed", "7"][..]] {
        let a = run_threads(args, "1");
        let b = run_threads(args, "3");
        let c = run_threads(args, "3");
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(b.stdout, c.stdout);
    }
}

#[test]
fn verify_only_and_fault_injection() {
    let o = run(&["verify", "--only", "eq13"]);
    assert!(o.status.success());
    let doc = json(&o);
    assert_valid(&doc);
    let checks = doc["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["name"], "operator_identity");
    assert_eq!(checks[0]["passed"], true);

    let o = run(&["verify", "--only", "eq14,reconstruction", "--inject-fault", "eq14"]);
    assert_eq!(o.status.code(), Some(2));
    let doc = json(&o);
    let checks = doc["checks"].as_array().unwrap();
    assert_eq!(checks[0]["passed"], false);
    // The wrong prefactor overshoots by 2F/u, far above the tolerance.
    assert!(checks[0]["measured"].as_f64().unwrap() > 1.0);
    assert_eq!(checks[1]["passed"], true);
}

#[test]
fn bec_map_examples() {
    let o = run(&["bec-map", "--n", "1000", "--theta-points", "19", "--phi-points", "24", "--delta", "0,0.1"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["theta", "phi", "delta", "Mzz_expansion", "Mzz_numeric_optional", "exceeds_sql"]);
    let mut exceeding = Vec::new();
    for r in &rows {
        let (t, p, d, m): (f64, f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert_eq!(r[4], "");
        if d == 0.0 {
            assert_eq!(r[5], "false");
        }
        if t == 0.0 {
            assert!((m - 8.0 * d).abs() < 1e-9, "{r:?}");
        }
        if r[5] == "true" {
            exceeding.push((t, p));
        }
    }
    assert!(!exceeding.is_empty());
    // Above the limit needs sin^2(theta) > N / (N + 2(N-6) delta + 2 sqrt(N(N-1) delta)) and cos(phi) < 0.32.
    assert!(exceeding.iter().all(|(t, p)| t.sin().powi(2) > 0.54 && p.cos() < 0.32), "{exceeding:?}");
    let negative = exceeding.iter().filter(|(_, p)| p.cos() < 0.0).count();
    assert!(2 * negative > exceeding.len());
}

#[test]
fn groundstate_and_witness() {
    let doc = json(&run(&["groundstate", "--n", "2", "--t", "1", "--u", "0"]));
    assert_valid(&doc);
    assert!((doc["rows"][0]["energy"].as_f64().unwrap() + 2.0).abs() < 1e-12);

    let doc = json(&run(&["witness", "--state", "noon", "--n", "2", "--direction", "0,0,1"]));
    assert_valid(&doc);
    assert!(doc["rows"][0]["depth_lower_bound"].as_u64().unwrap() >= 2);

    let doc = json(&run(&["witness", "--state", "coherent", "--n", "8"]));
    for row in doc["rows"].as_array().unwrap() {
        assert_eq!(row["depth_lower_bound"], 1);
    }

    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    std::fs::write(&q, r#"{"n_particles": 4, "entries": [[0,0,0],[0,0,0],[0,0,16]]}"#).unwrap();
    let doc = json(&run(&["witness", "--qfim", q.to_str().unwrap(), "--direction", "0,0,1"]));
    assert_eq!(doc["rows"][0]["depth_lower_bound"], 4);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["sweep", "--grid", "1"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--n", "abc"]).status.code(), Some(1));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--config", "/nonexistent/cfg"]).status.code(), Some(1));
    assert_eq!(run(&["witness", "--qfim", "/nonexistent/q.json"]).status.code(), Some(1));
    assert_eq!(run(&["groundstate", "--n", "0"]).status.code(), Some(1));
    assert_eq!(run(&["bec-map", "--n", "1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    for o in [run(&["sweep", "--grid", "1"]), run(&["witness", "--direction", "1,2"])] {
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(!err.contains("panicked"), "{err}");
    }
}

#[test]
fn strict_fails_on_unconverged_points() {
    // The dual route alone cannot reach the non-v-representable part of the
    // repulsive disk, so some points fail.
    let o = run(&["sweep", "--grid", "6", "--strategy", "dual", "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.iter().any(|r| r[7] == "false"));
    let o = run(&["sweep", "--grid", "6", "--strategy", "dual"]);
    assert!(o.status.success());
}
