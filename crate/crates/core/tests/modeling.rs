mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use twopoint::modeling::*;

const E: f64 = std::f64::consts::E;

fn sup_err(curve: &ReciprocatingCurve, oracle: impl Fn(f64) -> f64, n: usize) -> f64 {
    curve
        .probe_grid(n)
        .into_iter()
        .map(|x| (curve.eval(x) - oracle(x)).abs() / (1.0 + oracle(x).abs()))
        .fold(0.0, f64::max)
}

/// The power-family display, evaluated literally.
fn power_display(p: f64, c: f64, x: f64) -> f64 {
    if x >= 0.0 {
        c / p * (1.0 - (1.0 + x / c).powf(p))
    } else if p * x >= c {
        f64::INFINITY
    } else {
        c * ((1.0 - p * x / c).powf(1.0 / p) - 1.0)
    }
}

/// The hyperbolic display, evaluated literally (|alpha| < 1).
fn hyperbolic_display(alpha: f64, c: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (c + 2.0 * alpha * x - ((c + 2.0 * x.abs()).powi(2) + 8.0 * alpha * c * x).sqrt()) / (2.0 * (alpha + x.signum()))
}

/// A cancellation-free rewrite of the hyperbolic display that stays valid at
/// alpha = +-1 (where the display divides by zero on one side).
fn hyperbolic_rationalized(alpha: f64, c: f64, x: f64) -> f64 {
    let den = c + 2.0 * alpha * x + ((c + 2.0 * x.abs()).powi(2) + 8.0 * alpha * c * x).sqrt();
    if den <= 0.0 {
        return f64::INFINITY * -x.signum();
    }
    -2.0 * x * (c + x.abs() - alpha * x) / den
}

#[test]
fn power_family_examples() {
    let sym = power_family(PowerShape::P(1.0), 2.0).unwrap();
    for k in -20..=20 {
        let x = k as f64 / 4.0;
        assert!((sym.eval(x) + x).abs() < 1e-14);
    }
    let log = power_family(PowerShape::P(0.0), 1.0).unwrap();
    assert!((log.eval(E - 1.0) + 1.0).abs() < 1e-15);
    assert!((log.eval(-1.0) - (E - 1.0)).abs() < 1e-15);

    let neg = power_family(PowerShape::P(-2.0), 1.0).unwrap();
    assert_eq!((neg.a_minus, neg.a_plus), (-0.5, f64::INFINITY));
    assert_eq!(neg.eval(-0.5), f64::INFINITY);
    assert_eq!(neg.eval(-3.0), f64::INFINITY);
    assert!(neg.eval(-0.4).is_finite());
    assert!((neg.eval(1e12) + 0.5).abs() < 1e-6);
    assert_eq!(neg.eval(f64::INFINITY), -0.5);

    for p in [-3.0, -2.0, -0.5, 0.5, 2.0, 8.0] {
        let c = 1.5;
        let curve = power_family(PowerShape::P(p), c).unwrap();
        assert!(sup_err(&curve, |x| power_display(p, c, x), 100) < 1e-12, "p = {p}");
    }
    assert_eq!(power_family(PowerShape::P(1.0), 0.0).unwrap_err(), ModelingError::BadScale(0.0));
}

#[test]
fn power_family_limits() {
    let lambda = 0.8;
    for (shape, sign) in [(PowerShape::PlusInfinity, 1.0), (PowerShape::MinusInfinity, -1.0)] {
        let limit = power_family(shape, lambda).unwrap();
        let p = sign * 1e5;
        for k in 1..20 {
            let x = -0.7 + 0.1 * k as f64;
            let approx = power_display(p, p * lambda * sign, x);
            assert!((limit.eval(x) - approx).abs() < 1e-4 * (1.0 + approx.abs()), "{shape:?} x = {x}");
        }
    }
    let minus = power_family(PowerShape::MinusInfinity, lambda).unwrap();
    assert_eq!(minus.eval(-lambda), f64::INFINITY);
    // p = 1 with small c and c^(p - 1) -> kappa.
    let kappa = 2.0;
    let kink = power_family(PowerShape::Kink, kappa).unwrap();
    // Convergence is only logarithmic in c.
    let (c, p) = (1e-300, 1.0 + kappa.ln() / 1e-300f64.ln());
    for x in [-3.0, -1.0, 0.5, 2.0] {
        assert!((kink.eval(x) - power_display(p, c, x)).abs() < 1e-2 * (1.0 + x.abs()), "x = {x}");
    }
}

#[test]
fn hyperbolic_family_examples() {
    let zero = hyperbolic_family(0.0, 1.0).unwrap();
    assert!(sup_err(&zero, |x| -x, 100) < 1e-15);
    let half = hyperbolic_family(0.5, 1.0).unwrap();
    let r1 = half.eval(1.0);
    assert!((r1 - hyperbolic_display(0.5, 1.0, 1.0)).abs() < 1e-14);
    assert!((half.eval(r1) - 1.0).abs() < 1e-9);
    for alpha in [-0.9, -0.5, 0.25, 0.75] {
        let curve = hyperbolic_family(alpha, 2.0).unwrap();
        assert!(sup_err(&curve, |x| hyperbolic_display(alpha, 2.0, x), 200) < 1e-12);
        // r(x) ~ (alpha -+ 1) / (alpha +- 1) x at +-inf.
        let big = 1e9;
        assert!((curve.eval(big) / big - (alpha - 1.0) / (alpha + 1.0)).abs() < 1e-6);
        assert!((curve.eval(-big) / -big - (alpha + 1.0) / (alpha - 1.0)).abs() < 1e-6);
    }
    assert_eq!(hyperbolic_family(1.5, 1.0).unwrap_err(), ModelingError::BadAlpha(1.5));
}

#[test]
fn hyperbolic_endpoints_at_unit_alpha() {
    let one = hyperbolic_family(1.0, 1.0).unwrap();
    assert_eq!((one.a_minus, one.a_plus), (-0.5, f64::INFINITY));
    assert_eq!(one.eval(-0.5), f64::INFINITY);
    assert!(one.eval(-0.5 + 1e-6) > 1e4);
    assert!((one.eval(1e8) + 0.5).abs() < 1e-6);
    assert!(sup_err(&one, |x| hyperbolic_rationalized(1.0, 1.0, x), 200) < 1e-9);

    let minus = hyperbolic_family(-1.0, 1.0).unwrap();
    assert_eq!((minus.a_minus, minus.a_plus), (f64::NEG_INFINITY, 0.5));
    assert_eq!(minus.eval(0.5), f64::NEG_INFINITY);
    assert!((minus.eval(-1e8) - 0.5).abs() < 1e-6);
    assert!(sup_err(&minus, |x| hyperbolic_rationalized(-1.0, 1.0, x), 200) < 1e-9);
}

#[test]
fn cubic_rate_examples() {
    let zero = cubic_rate_family(0.0, 1.0).unwrap();
    assert!(sup_err(&zero, |x| -x, 100) < 1e-14);
    let shift = 8.0 / (3.0 * 3f64.sqrt());
    let one = cubic_rate_family(1.0, 1.0).unwrap();
    assert!((one.eval(100.0) + 100.0 - shift).abs() < 1e-2);
    assert!((one.eval(-100.0) - 100.0 - shift).abs() < 1e-2);
    // The rate a' peaks at c / sqrt 3 with value alpha.
    for (alpha, c) in [(1.0, 1.0), (-0.5, 2.0)] {
        let pat = cubic_rate_pattern(alpha, c).unwrap();
        let rate = |w: f64| (pat.eval(w + 1e-6) - pat.eval(w - 1e-6)) / 2e-6;
        let peak = c / 3f64.sqrt();
        assert!((rate(peak) - alpha).abs() < 1e-8);
        for w in [0.5 * peak, 0.9 * peak, 1.1 * peak, 2.0 * peak] {
            assert!(rate(w).abs() < rate(peak).abs());
        }
    }
}

#[test]
fn pattern_construction() {
    let flat = AsymmetryPattern::new(Arc::new(|_| 0.0), f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
    let curve = from_asymmetry_pattern(flat).unwrap();
    assert!(sup_err(&curve, |x| -x, 100) < 1e-14);

    let built = from_asymmetry_pattern(hyperbolic_pattern(0.5, 1.0).unwrap()).unwrap();
    assert!(sup_err(&built, |x| hyperbolic_display(0.5, 1.0, x), 200) < 1e-9);

    let power = power_family(PowerShape::P(2.0), 1.0).unwrap();
    let back = from_asymmetry_pattern(asymmetry_pattern_of(&power).unwrap()).unwrap();
    assert!(sup_err(&back, |x| power.eval(x), 200) < 1e-8);
}

#[test]
fn pattern_extraction() {
    let sym = power_family(PowerShape::P(1.0), 1.0).unwrap();
    let a = asymmetry_pattern_of(&sym).unwrap();
    for k in 0..50 {
        assert!(a.eval(k as f64 * 0.3).abs() < 1e-12);
    }
    for (alpha, c) in [(0.5, 1.0), (-0.75, 3.0)] {
        let a = asymmetry_pattern_of(&hyperbolic_family(alpha, c).unwrap()).unwrap();
        for k in 0..50 {
            let w = 0.2 * k as f64;
            assert!((a.eval(w) - alpha * w * w / (c + w)).abs() < 1e-9, "w = {w}");
        }
    }
    // Two-sided agreement at w = 1 for p = 0.
    let log = power_family(PowerShape::P(0.0), 1.0).unwrap();
    let right = asymmetry_pattern_of(&log).unwrap().eval(1.0);
    let s = bisect(|s| log.eval(-s) + s - 1.0, 0.0, 1.0);
    let left = log.eval(-s) - s;
    assert!((right - left).abs() < 1e-9, "{right} vs {left}");

    let cubed = ReciprocatingCurve::custom(f64::NEG_INFINITY, f64::INFINITY, Arc::new(|x: f64| -x * x * x)).unwrap();
    assert!(matches!(asymmetry_pattern_of(&cubed), Err(ModelingError::NotValidCurve(_))));
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn lip1_is_enforced() {
    let steep = AsymmetryPattern::new(Arc::new(|w: f64| w), f64::NEG_INFINITY, 1.0, 1.0).unwrap();
    assert!(matches!(from_asymmetry_pattern(steep.clone()), Err(ModelingError::Lip1Violated { .. })));
    let wavy = AsymmetryPattern::new(Arc::new(|w: f64| 0.3 * (5.0 * w).sin()), f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
    assert!(matches!(from_asymmetry_pattern(wavy), Err(ModelingError::Lip1Violated { .. })));
    let shifted = AsymmetryPattern::new(Arc::new(|w: f64| 0.1 + 0.0 * w), f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
    assert!(matches!(from_asymmetry_pattern(shifted), Err(ModelingError::BadPattern(_))));
    // Non-Lip(1) but increasing xi and rho still give a reciprocating curve.
    let loose = AsymmetryPattern::new(Arc::new(|w: f64| 0.99 * w * w / (1.0 + w)), f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
    let curve = from_asymmetry_pattern_with(loose, false).unwrap();
    assert!(validate_curve(&curve, 200, 1e-9, true).passed());
}

#[test]
fn validate_curve_reports() {
    let curves = [
        power_family(PowerShape::P(-1.0), 1.0).unwrap(),
        power_family(PowerShape::P(0.0), 2.0).unwrap(),
        power_family(PowerShape::PlusInfinity, 1.0).unwrap(),
        hyperbolic_family(0.5, 1.0).unwrap(),
        hyperbolic_family(-1.0, 1.0).unwrap(),
        cubic_rate_family(0.7, 1.0).unwrap(),
    ];
    for curve in &curves {
        let rep = validate_curve(curve, 200, 1e-9, true);
        assert!(rep.passed(), "{curve:?}: {:?}", rep.violations);
    }
    let kink = power_family(PowerShape::Kink, 2.0).unwrap();
    let rep = validate_curve(&kink, 200, 1e-9, true);
    assert!(rep.involution_ok && rep.continuous && rep.strictly_decreasing);
    assert_eq!(rep.derivative_ok, Some(false));
    assert!((rep.derivative_at_zero.unwrap() + 1.25).abs() < 1e-9);

    let cubed = ReciprocatingCurve::custom(f64::NEG_INFINITY, f64::INFINITY, Arc::new(|x: f64| -x * x * x)).unwrap();
    let rep = validate_curve(&cubed, 200, 1e-9, false);
    assert!(!rep.involution_ok);

    let jumpy = ReciprocatingCurve::custom(f64::NEG_INFINITY, f64::INFINITY, Arc::new(|x: f64| if x > 0.3 { -x - 1.0 } else { -x })).unwrap();
    let rep = validate_curve(&jumpy, 200, 1e-9, false);
    assert!(!rep.continuous);
    let wrong_end = ReciprocatingCurve::custom(-1.0, f64::INFINITY, Arc::new(|x: f64| -x)).unwrap();
    assert!(!validate_curve(&wrong_end, 50, 1e-9, false).boundary_constant);
}

#[test]
fn x_pm_worked_example() {
    let v = validate_x_pm(Arc::new(|h: f64| 3.0 / (1.0 - h)), Arc::new(|_| -3.0), 1.0, 1000).unwrap();
    assert!((v.p_zero - 0.5).abs() < 1e-12);
    let cdf = |x: f64| {
        if x < -3.0 {
            0.0
        } else if x < 0.0 {
            1.0 / 3.0
        } else if x < 3.0 {
            5.0 / 6.0
        } else {
            1.0 - 3.0 / (2.0 * x * x)
        }
    };
    for x in [-4.0, -3.0, -1.0, 0.0, 1.0, 3.0, 4.0, 10.0] {
        let got = v.measure.cdf(x);
        assert!((got - cdf(x)).abs() < 1e-9, "F({x}) = {got}, want {}", cdf(x));
    }
    assert!((v.measure.m() - 1.0).abs() < 1e-15);
    assert!((v.measure.x_plus(0.5).unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(v.measure.x_minus(0.5).unwrap(), -3.0);
}

#[test]
fn x_pm_failures() {
    let neg = validate_x_pm(Arc::new(|h: f64| -h), Arc::new(|_| -1.0), 1.0, 100);
    assert!(matches!(neg, Err(ModelingError::CharacterizationFailed(_))));
    // Integrals sum to 2.
    let heavy = validate_x_pm(Arc::new(|_| 1.0), Arc::new(|_| -1.0), 1.0, 100);
    assert!(matches!(heavy, Err(ModelingError::CharacterizationFailed(_))));
    let decreasing = validate_x_pm(Arc::new(|h: f64| 5.0 - h), Arc::new(|_| -5.0), 1.0, 100);
    assert!(matches!(decreasing, Err(ModelingError::CharacterizationFailed(_))));
    // Right-continuous step at h = 1/2.
    let right_cont = validate_x_pm(Arc::new(|h: f64| if h >= 0.5 { 4.0 } else { 2.0 }), Arc::new(|_| -4.0), 1.0, 100);
    assert!(matches!(right_cont, Err(ModelingError::CharacterizationFailed(_))));
    let left_cont = validate_x_pm(Arc::new(|h: f64| if h > 0.5 { 4.0 } else { 2.0 }), Arc::new(|_| -4.0), 1.0, 100);
    assert!(left_cont.is_ok());
}

#[test]
fn x_pm_steps_round_trip() {
    for m in [example(), four_atom(), zero_heavy(), symmetric_pair()] {
        let (plus, minus) = x_pm_steps(&m).unwrap();
        let v = validate_x_pm_steps(&plus, &minus).unwrap();
        let got = v.measure.exact().unwrap().atoms().map(|(x, p)| (x.clone(), p.clone())).collect::<Vec<_>>();
        let want = m.exact().unwrap().atoms().map(|(x, p)| (x.clone(), p.clone())).collect::<Vec<_>>();
        assert_eq!(got, want);
    }
    let (plus, minus) = x_pm_steps(&example()).unwrap();
    assert_eq!(plus, vec![(q(3, 10), q(1, 1)), (q(1, 2), q(2, 1))]);
    assert_eq!(minus, vec![(q(1, 2), q(-1, 1))]);
    let bad = validate_x_pm_steps(&[(q(1, 2), q(1, 4))], &[(q(1, 2), q(-1, 1))]);
    assert!(matches!(bad, Err(ModelingError::CharacterizationFailed(_))));
}

#[test]
fn family_specs_parse() {
    let spec: FamilySpec = serde_json::from_str(r#"{"family":"power","p":2,"c":1}"#).unwrap();
    assert_eq!(spec, FamilySpec::Power { p: ShapeParam::Num(2.0), c: 1.0 });
    let inf: FamilySpec = serde_json::from_str(r#"{"family":"power","p":"-inf","c":0.5}"#).unwrap();
    assert_eq!(inf.build().unwrap().a_minus, -0.5);
    let hyp: FamilySpec = serde_json::from_str(r#"{"family":"hyperbolic","alpha":0.5,"c":1}"#).unwrap();
    assert!((hyp.build().unwrap().eval(1.0) - hyperbolic_display(0.5, 1.0, 1.0)).abs() < 1e-14);
    let bad: FamilySpec = serde_json::from_str(r#"{"family":"power","p":"huge","c":1}"#).unwrap();
    assert!(matches!(bad.build(), Err(ModelingError::BadSpec(_))));
    assert!(serde_json::from_str::<FamilySpec>(r#"{"family":"spline"}"#).is_err());
}

fn any_curve() -> impl Strategy<Value = ReciprocatingCurve> {
    prop_oneof![
        (-4.0f64..8.0, 0.2f64..5.0).prop_map(|(p, c)| power_family(PowerShape::P(p), c).unwrap()),
        (-0.99f64..0.99, 0.2f64..5.0).prop_map(|(a, c)| hyperbolic_family(a, c).unwrap()),
        (-1.0f64..=1.0, 0.2f64..5.0).prop_map(|(a, c)| cubic_rate_family(a, c).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn involution_and_graph_symmetry(curve in any_curve()) {
        for x in curve.probe_grid(200) {
            let r = curve.eval(x);
            prop_assert!((curve.eval(r) - x).abs() <= 1e-9 * (1.0 + x.abs()), "{:?} at {}", curve, x);
            // (r, x) is on the graph: r(r) = x with r in the support.
            prop_assert!(r >= curve.a_minus && r <= curve.a_plus);
        }
        prop_assert_eq!(curve.eval(0.0), 0.0);
    }

    #[test]
    fn xi_and_rho_increase(alpha in -1.0f64..=1.0, c in 0.2f64..5.0, cubic in any::<bool>()) {
        let pat = if cubic { cubic_rate_pattern(alpha, c).unwrap() } else { hyperbolic_pattern(alpha, c).unwrap() };
        let mut prev = (0.0, 0.0);
        for k in 1..400 {
            let w = 0.05 * c * k as f64;
            let (xi, rho) = (pat.xi(w), pat.rho(w));
            prop_assert!(xi > prev.0 && rho > prev.1);
            prev = (xi, rho);
        }
    }

    #[test]
    fn power_family_is_monotone_in_p(x in 0.01f64..20.0, c in 0.2f64..5.0) {
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let p = -4.0 + 0.25 * k as f64;
            let r = power_family(PowerShape::P(p), c).unwrap().eval(x);
            prop_assert!(r <= prev + 1e-12 * prev.abs().max(1.0));
            prev = r;
        }
    }

    #[test]
    fn pattern_round_trip(curve in any_curve()) {
        let back = from_asymmetry_pattern(asymmetry_pattern_of(&curve).unwrap()).unwrap();
        for x in curve.probe_grid(40) {
            let (a, b) = (curve.eval(x), back.eval(x));
            // The pattern stores x + r(x); recovering x from it loses about
            // |r(x)| / |x| ulps, which matters only for extreme asymmetry.
            let kappa = (1.0 + a.abs()) / (1.0 + x.abs());
            let tol = 1e-8f64.max(1e-14 * kappa);
            prop_assert!(graph_distance(&curve, x, b) <= tol, "{:?} at {}: {} vs {}", curve, x, a, b);
        }
    }
}
