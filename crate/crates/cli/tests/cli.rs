use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE: &str = r#"{"backend":"discrete","atoms":[[-1,"1/2"],[0,"1/10"],[1,"3/10"],[2,"1/10"]]}"#;
const FOUR_ATOM: &str = r#"{"backend":"discrete","atoms":[[-2,"1/10"],[-1,"2/5"],[1,"2/5"],[2,"1/10"]]}"#;
const SKEWED_ALT: &str =
    r#"{"components":[{"a":1,"b":-2,"w":0.3},{"a":2,"b":-1,"w":0.3},{"a":1,"b":-1,"w":0.4}]}"#;

fn twopoint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twopoint")).args(args).output().unwrap()
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn disintegrate_example_weights() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "ex.json", EXAMPLE);
    let out = twopoint(&["disintegrate", "--input", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let comps = v["components"].as_array().unwrap();
    let w: Vec<f64> = comps.iter().map(|c| c["w"].as_f64().unwrap()).collect();
    assert_eq!(w, [0.6, 0.3, 0.1]);
    let exact: Vec<&str> = comps.iter().map(|c| c["exact"]["w"].as_str().unwrap()).collect();
    assert_eq!(exact, ["3/5", "3/10", "1/10"]);
    assert_eq!(v["m"].as_f64(), Some(0.5));
}

#[test]
fn disintegrate_output_feeds_optimal_as_alternative() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "ex.json", EXAMPLE);
    let d = dir.path().join("d.json");
    assert_eq!(twopoint(&["disintegrate", "--input", s(&m), "--output", s(&d)]).status.code(), Some(0));
    let out = twopoint(&["optimal", "--input", s(&m), "--alt", s(&d), "--p", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["ok"], Value::Bool(true));
    for c in v["costs"].as_array().unwrap() {
        let (alt, canonical) = (c["alt_cost"].as_f64().unwrap(), c["canonical_cost"].as_f64().unwrap());
        assert!((alt - canonical).abs() < 1e-12, "{c}");
    }
}

#[test]
fn disintegrate_pairs_need_seed() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "ex.json", EXAMPLE);
    let out = twopoint(&["disintegrate", "--input", s(&m), "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = twopoint(&["disintegrate", "--input", s(&m), "--n", "10", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x,r,u"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn verify_non_zero_mean_exits_one() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "bad.json", r#"{"backend":"discrete","atoms":[[-1,"1/2"],[3,"1/2"]]}"#);
    let out = twopoint(&["verify", "--input", s(&m)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "NonZeroMean");
    assert!(String::from_utf8_lossy(&out.stderr).contains("NonZeroMean"));
}

#[test]
fn verify_passes_on_example_and_samples() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "ex.json", EXAMPLE);
    let out = twopoint(&["verify", "--input", s(&m), "--n", "20000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["failed"], 0);
    assert!(v["passed"].as_u64().unwrap() >= 15);
    let csv = file(&dir, "xs.csv", "x\n0\n1\n2\n-3\n");
    assert_eq!(twopoint(&["verify", "--input", s(&csv)]).status.code(), Some(0));
}

#[test]
fn gaussian_test_on_symmetric_pairs_is_classical_student_form() {
    let dir = TempDir::new().unwrap();
    let xs = [1.5, -0.5, 2.0, 0.25, -1.0, 3.0];
    let body: String = std::iter::once("x,r".to_string()).chain(xs.iter().map(|x| format!("{x},{}", -x))).collect::<Vec<_>>().join("\n");
    let p = file(&dir, "pairs.csv", &body);
    let out = twopoint(&["test", "--input", s(&p), "--mode", "gaussian"]);
    assert_eq!(out.status.code(), Some(0));
    let classical = xs.iter().sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stat = json(&out)["statistic"].as_f64().unwrap();
    assert!((stat - classical).abs() < 1e-14, "{stat} vs {classical}");
}

#[test]
fn test_computes_partners_from_measure() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "ex.json", EXAMPLE);
    let p = file(&dir, "xs.csv", "x\n1\n-1\n2\n0\n-1\n1\n");
    assert_eq!(twopoint(&["test", "--input", s(&p)]).status.code(), Some(2));
    assert_eq!(twopoint(&["test", "--input", s(&p), "--measure", s(&m)]).status.code(), Some(2));
    let out = twopoint(&["test", "--input", s(&p), "--measure", s(&m), "--seed", "3", "--mode", "bernoulli"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["bound_kind"], "bernoulli_c30_lc");
    assert_eq!(v["n"], 6);
}

#[test]
fn model_table_and_report() {
    let out = twopoint(&["model", "--family", "hyperbolic", "--alpha", "0.5", "--grid", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.contains("0.0000000000000000e0,0.0000000000000000e0"));
    let out = twopoint(&["model", "--family", r#"{"family":"power","p":"inf","c":1}"#, "--format", "report"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["violations"].as_array().unwrap().is_empty());
    assert_eq!(twopoint(&["model", "--family", "power"]).status.code(), Some(2));
    assert_eq!(twopoint(&["model", "--family", "hyperbolic", "--alpha", "7"]).status.code(), Some(1));
}

#[test]
fn optimal_on_four_atom_measure() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "four.json", FOUR_ATOM);
    let a = file(&dir, "alt.json", SKEWED_ALT);
    let out = twopoint(&["optimal", "--input", s(&m), "--alt", s(&a), "--p", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["marginal"]["matches"], true);
    let first = &v["costs"][0];
    assert_eq!(first["cost"], "neg_abs_diff_pow(1)");
    assert!((first["alt_cost"].as_f64().unwrap() + 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(first["canonical_cost"].as_f64(), Some(0.0));

    let wrong = file(&dir, "wrong.json", r#"{"components":[{"a":2,"b":-2,"w":1}]}"#);
    let out = twopoint(&["optimal", "--input", s(&m), "--alt", s(&wrong)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["marginal"]["matches"], false);

    let cost = r#"{"kind":"indicator_ge","a":2,"b":2}"#;
    let out = twopoint(&["optimal", "--input", s(&m), "--alt", s(&a), "--cost", cost]);
    let v = json(&out);
    assert_eq!(v["costs"][0]["alt_cost"].as_f64(), Some(0.0));
    assert!((v["costs"][0]["canonical_cost"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(twopoint(&["optimal", "--input", s(&m), "--alt", s(&a), "--n", "100"]).status.code(), Some(2));
}

#[test]
fn estimate_requires_seed_and_reports_run() {
    let dir = TempDir::new().unwrap();
    let xs: String = (0..60).map(|i| format!("{}\n", ((i * 37) % 23) as f64 / 5.0 - 2.0)).collect();
    let p = file(&dir, "xs.csv", &xs);
    assert_eq!(twopoint(&["estimate", "--input", s(&p)]).status.code(), Some(2));
    let out = twopoint(&["estimate", "--input", s(&p), "--seed", "8", "--B", "300"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["B"], 300);
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() < ci[1].as_f64().unwrap());
    assert_eq!(twopoint(&["estimate", "--input", s(&p), "--seed", "8", "--B", "10"]).status.code(), Some(1));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "ex.json", EXAMPLE);
    let xs: String = (0..40).map(|i| format!("{}\n", ((i * 17) % 11) as f64 - 4.0)).collect();
    let p = file(&dir, "xs.csv", &xs);
    let runs: [&[&str]; 4] = [
        &["disintegrate", "--input", s(&m)],
        &["disintegrate", "--input", s(&m), "--n", "50", "--seed", "9"],
        &["verify", "--input", s(&m), "--n", "5000", "--seed", "9"],
        &["estimate", "--input", s(&p), "--seed", "9", "--B", "200"],
    ];
    for args in runs {
        let a = twopoint(args);
        let b = twopoint(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(twopoint(&[]).status.code(), Some(2));
    assert_eq!(twopoint(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(twopoint(&["verify", "--input", "/no/such/file.json"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let broken = file(&dir, "broken.json", "{not json");
    assert_eq!(twopoint(&["verify", "--input", s(&broken)]).status.code(), Some(2));
}
