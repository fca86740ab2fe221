mod common;

use common::*;
use proptest::prelude::*;
use twopoint::disintegration::{decompose_exact, sample_pairs};
use twopoint::invariants::{verify, VerifyOptions, VerifyReport};
use twopoint::io::*;
use twopoint::optimal::{canonical_alternative, marginal_check};
use twopoint::{MeasureError, Rational, ZeroMeanMeasure};

fn exact_atoms(m: &ZeroMeanMeasure) -> Vec<(Rational, Rational)> {
    m.exact().unwrap().atoms().map(|(x, p)| (x.clone(), p.clone())).collect()
}

const EXAMPLE_JSON: &str = r#"{"backend":"discrete","atoms":[[-1,"1/2"],[0,"1/10"],[1,"3/10"],[2,"1/10"]]}"#;

#[test]
fn measure_json_with_rational_masses_is_exact() {
    let m = parse_measure(EXAMPLE_JSON).unwrap();
    assert_eq!(exact_atoms(&m), exact_atoms(&example()));
    let floats = parse_measure(r#"{"backend":"discrete","atoms":[[-1,0.5],[0,0.1],[1,0.3],[2,0.1]]}"#).unwrap();
    assert_eq!(exact_atoms(&floats), exact_atoms(&example()));
}

#[test]
fn measure_json_errors() {
    let shifted = r#"{"backend":"discrete","atoms":[[0,"1/2"],[2,"1/2"]]}"#;
    assert!(matches!(parse_measure(shifted), Err(IoError::Measure(MeasureError::NonZeroMean { .. }))));
    let recentred = r#"{"backend":"discrete","atoms":[[0,"1/2"],[2,"1/2"]],"recentre":true}"#;
    assert_eq!(parse_measure(recentred).unwrap().m(), 0.5);
    assert!(matches!(parse_measure(r#"{"backend":"discrete","atoms":[[1,"x"]]}"#), Err(IoError::BadNumber(_))));
    assert!(matches!(parse_measure(r#"{"backend":"weird"}"#), Err(IoError::Json(_))));
    assert!(matches!(parse_measure(r#"{"backend":"analytic","law":"cauchy"}"#), Err(IoError::Schema(_))));
}

#[test]
fn analytic_and_empirical_specs() {
    let u = parse_measure(r#"{"backend":"analytic","law":"uniform","half_width":2}"#).unwrap();
    assert!((u.m() - 0.5).abs() < 1e-12);
    let e = parse_measure(r#"{"backend":"empirical","samples":[0,1,2,-3]}"#).unwrap();
    assert_eq!(e.atoms().unwrap().len(), 4);
    assert!(e.atoms().unwrap().iter().all(|a| (a.1 - 0.25).abs() < 1e-15));
}

#[test]
fn measure_spec_round_trips() {
    let spec = measure_spec(&example()).unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(exact_atoms(&parse_measure(&text).unwrap()), exact_atoms(&example()));
}

#[test]
fn decomposition_file_round_trips_as_alternative() {
    let d = decompose_exact(&example()).unwrap();
    let file = DecompositionFile::from_decomposition(&d);
    let weights: Vec<&Num> = file.components.iter().map(|c| &c.w).collect();
    assert_eq!(weights, [&Num::Text("3/5".into()), &Num::Text("3/10".into()), &Num::Text("1/10".into())]);
    let text = serde_json::to_string(&file).unwrap();
    let alt = parse_alternative(&text).unwrap();
    assert!(marginal_check(&alt, &example()).unwrap().matches);
    assert_eq!(alt, canonical_alternative(&example()).unwrap());
}

#[test]
fn csv_readers() {
    let xs = read_samples("x\n1.5\n-2\n\n# note\n0.5\n".as_bytes()).unwrap();
    assert_eq!(xs, [1.5, -2.0, 0.5]);
    assert!(read_samples("1,2\n".as_bytes()).is_err());

    let (x, r) = read_pairs("r,x\n-1,2\n3,-4\n".as_bytes()).unwrap();
    assert_eq!((x, r), (vec![2.0, -4.0], Some(vec![-1.0, 3.0])));
    let (x, r) = read_pairs("1\n-1\n".as_bytes()).unwrap();
    assert_eq!((x, r), (vec![1.0, -1.0], None));
    let (x, r) = read_pairs("0.5,-0.5,0.3\n".as_bytes()).unwrap();
    assert_eq!((x, r), (vec![0.5], Some(vec![-0.5])));
    assert!(read_pairs("x,r\n1,2\n3\n".as_bytes()).is_err());
}

#[test]
fn pair_csv_round_trip() {
    let pairs = sample_pairs(&example(), 50, 7);
    let text = write_table(&["x", "r", "u"], pairs.iter().map(|p| vec![p.x, p.r, p.u]));
    let (x, r) = read_pairs(text.as_bytes()).unwrap();
    assert_eq!(x, pairs.iter().map(|p| p.x).collect::<Vec<_>>());
    assert_eq!(r.unwrap(), pairs.iter().map(|p| p.r).collect::<Vec<_>>());
}

#[test]
fn canonical_json_is_stable_and_parseable() {
    let d = twopoint::disintegration::decompose(&example()).unwrap();
    let a = to_canonical_json(&d).unwrap();
    assert_eq!(a, to_canonical_json(&d.clone()).unwrap());
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["components"][0]["weight"].as_f64(), Some(0.6));
    // Keys appear in sorted order.
    let law = a.find("\"law\"").unwrap();
    let weight = a.find("\"weight\"").unwrap();
    assert!(law < weight);
}

#[test]
fn verify_passes_on_reference_measures() {
    let opts = VerifyOptions { grid: 50, monte_carlo: Some((100_000, 4)) };
    for m in [example(), symmetric_pair(), four_atom(), zero_heavy(), ZeroMeanMeasure::uniform(1.0).unwrap()] {
        let report = verify(&m, &opts);
        assert!(report.ok(), "{report:#?}");
        assert!(report.passed >= 9);
    }
    let report = verify(&example(), &VerifyOptions::default());
    assert!(report.exact && report.checks.iter().all(|c| c.value == 0.0 || c.name.starts_with("mixture")));
}

#[test]
fn verify_reports_construction_errors() {
    let err = parse_measure(r#"{"backend":"discrete","atoms":[[1,"1/2"],[2,"1/2"]]}"#).unwrap_err();
    let IoError::Measure(e) = err else { panic!("{err}") };
    let report = VerifyReport::construction_error(&e);
    assert!(!report.ok());
    assert_eq!(report.error.unwrap().kind, "NonZeroMean");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verify_holds_for_random_mixtures(m in measure_strategy()) {
        let report = verify(&m, &VerifyOptions { grid: 20, monte_carlo: None });
        prop_assert!(report.ok(), "{:#?}", report);
    }

    #[test]
    fn floats_survive_canonical_json(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let text = to_canonical_json(&vec![x]).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back[0], x);
    }
}
