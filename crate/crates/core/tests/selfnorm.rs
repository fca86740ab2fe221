mod common;

use common::*;
use proptest::prelude::*;
use twopoint::numerics::{normal_partial_moment, normal_tail};
use twopoint::selfnorm::*;
use twopoint::ZeroMeanMeasure;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn s_w_examples() {
    let xs = [1.5, -0.5, 2.0, -3.0];
    let rs: Vec<f64> = xs.iter().map(|x| -x).collect();
    let classical = xs.iter().sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(close(s_w(&xs, &rs).unwrap(), classical, 1e-15));
    assert_eq!(s_w(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(s_w(&[1.0, -1.0], &[-1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(s_w(&[1.0], &[]).unwrap_err(), SelfNormError::LengthMismatch { xs: 1, rs: 0 });
}

#[test]
fn s_y_examples() {
    let xs = [1.5, -0.5, 2.0, -3.0];
    let rs: Vec<f64> = xs.iter().map(|x| -x).collect();
    assert!(close(s_y(&xs, &rs, 1.0).unwrap(), s_w(&xs, &rs).unwrap(), 1e-15));
    assert!(close(s_y(&[2.0], &[-1.0], 1.0).unwrap(), 2f64.sqrt(), 1e-15));
    assert_eq!(s_y(&[0.0; 3], &[0.0; 3], 2.0).unwrap(), 0.0);
    assert_eq!(s_y(&[1.0], &[-1.0], 0.0).unwrap_err(), SelfNormError::BadLambda(0.0));
}

#[test]
fn lambda_star_values() {
    assert_eq!(lambda_star(0.5).unwrap(), 1.0);
    assert_eq!(lambda_star(0.75).unwrap(), 1.0);
    // The first branch also gives exactly 1 at p = 1/2: (1 + 1/2 + 1/2) / (2 (1/2 + 1/2)).
    let p = 0.5f64;
    assert_eq!((1.0 + p + 2.0 * p * p) / (2.0 * ((p - p * p).sqrt() + 2.0 * p * p)), 1.0);
    let l = lambda_star(1.0 / 3.0).unwrap();
    assert!(close(l, 1.1218, 1e-3));
    assert!(close(l, 1.121_320_343_559_642_4, 1e-12), "{l}");
    assert_eq!(lambda_star(0.0).unwrap_err(), SelfNormError::BadP(0.0));
    assert_eq!(lambda_star(1.0).unwrap_err(), SelfNormError::BadP(1.0));
}

#[test]
fn constants() {
    assert!(close(c50(), 5.6993, 1e-3));
    assert!(close(c30(), 4.46336, 1e-4));
    assert_eq!(gaussian_bound(f64::NEG_INFINITY), 1.0);
    assert!(close(gaussian_bound(3.0), 7.693_157_043_477_974e-3, 1e-15));
}

#[test]
fn bernoulli_model_small_cases() {
    let m = bernoulli_tail_model(1, 0.5, 1.0).unwrap();
    assert_eq!(m.support.iter().map(|s| s.0).collect::<Vec<_>>(), vec![-1.0, 1.0]);
    assert_eq!(m.tail(1e-9), 0.5);
    assert_eq!(m.tail(-5.0), 1.0);
    assert_eq!(m.lc(-5.0), 1.0);
    assert_eq!(m.tail(1.5), 0.0);
    assert_eq!(m.lc(1.5), 0.0);
    assert!(matches!(bernoulli_tail_model(2_000_000, 0.5, 1.0), Err(SelfNormError::TooLarge(_))));
}

/// Binomial tail by direct pmf recursion.
fn binomial_tail(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![(1.0 - p).powi(n as i32)];
    for k in 1..=n {
        let prev = pmf[k - 1];
        pmf.push(prev * (n - k + 1) as f64 / k as f64 * p / (1.0 - p));
    }
    (0..=n).map(|k| pmf[k..].iter().sum()).collect()
}

#[test]
fn bernoulli_model_matches_direct_binomial() {
    for &(n, p, lambda) in &[(10usize, 1.0 / 3.0, 1.2), (25, 0.1, 2.0), (7, 0.8, 1.0)] {
        let m = bernoulli_tail_model(n, p, lambda).unwrap();
        let direct = binomial_tail(n, p);
        let scale = (p * (1.0 - p)).sqrt() * (n as f64).powf(0.5 / lambda);
        for (k, &(t, tail)) in m.support.iter().enumerate() {
            assert!(close(t, (k as f64 - n as f64 * p) / scale, 1e-12));
            assert!((tail - direct[k]).abs() <= 1e-12 * direct[k].max(1e-300) + 1e-15, "{k}: {tail} vs {}", direct[k]);
        }
    }
}

#[test]
fn certificate_examples() {
    let (p, g) = asymmetry_certificate_exact(&example()).unwrap();
    assert_eq!((p, g), (q(1, 3), q(2, 1)));
    assert_eq!(asymmetry_certificate(&symmetric_pair()).unwrap(), (0.5, 1.0));
    assert_eq!(asymmetry_certificate(&four_atom()).unwrap(), (0.5, 1.0));
    let skew = ZeroMeanMeasure::from_atoms(&[(-1.0, 0.75), (3.0, 0.25)], false).unwrap();
    assert_eq!(asymmetry_certificate(&skew).unwrap(), (0.25, 3.0));
    let uni = ZeroMeanMeasure::uniform(1.0).unwrap();
    assert_eq!(asymmetry_certificate(&uni).unwrap_err(), SelfNormError::NotDiscrete);
}

#[test]
fn conservative_test_modes() {
    let r = conservative_test(&[-5.0, -5.0], &[5.0, 5.0], TestMode::Gaussian).unwrap();
    assert!(r.statistic < -1.0);
    assert_eq!(r.p_conservative, 1.0);
    assert_eq!(r.bound_kind, BoundKind::GaussianC50);

    let xs = [2.0, -1.0, 1.0, 2.0, -1.0, -1.0];
    let rs = [-1.0, 2.0, -1.0, -1.0, 1.0, 2.0];
    let r = conservative_test(&xs, &rs, TestMode::Bernoulli { p: 1.0 / 3.0, lambda: 1.2 }).unwrap();
    assert_eq!(r.bound_kind, BoundKind::BernoulliC30Lc);
    assert_eq!(r.constants_used.extra, Some(1.2));
    assert!(close(r.statistic, s_y(&xs, &rs, 1.2).unwrap(), 1e-15));
    assert!(r.p_conservative > 0.0 && r.p_conservative <= 1.0);

    assert!(matches!(
        conservative_test(&xs, &rs, TestMode::Bernoulli { p: 1.0 / 3.0, lambda: 1.0 }),
        Err(SelfNormError::LambdaTooSmall { .. })
    ));
    assert!(matches!(
        conservative_test(&xs, &rs, TestMode::Bernoulli { p: 0.5, lambda: 1.0 }),
        Err(SelfNormError::AsymmetryViolated { index: 0, .. })
    ));
}

#[test]
fn bernoulli_pairs_reproduce_t_n() {
    // Standardized Bernoulli pairs have |x r| = 1, so S_Y is T_n itself.
    let p = 0.25f64;
    let (hi, lo) = (((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt());
    let xs = [hi, lo, lo, hi, lo];
    let rs = [lo, hi, hi, lo, hi];
    let lambda = 1.5;
    let t = (2.0 * hi + 3.0 * lo) / 5f64.powf(1.0 / (2.0 * lambda));
    assert!(close(s_y(&xs, &rs, lambda).unwrap(), t, 1e-14));
}

#[test]
fn s_w_tail_respects_gaussian_bound() {
    let reps = 40_000;
    let stats = simulate_statistic(&example(), Statistic::W, 10, reps, 21).unwrap();
    for k in 0..40 {
        let x = -1.0 + 0.125 * k as f64;
        let emp = stats.iter().filter(|&&s| s >= x).count() as f64 / reps as f64;
        let b = gaussian_bound(x);
        assert!(emp <= b + 3.0 * (b * (1.0 - b) / reps as f64).sqrt() + 1e-12, "x = {x}: {emp} > {b}");
    }
}

#[test]
fn h5_generators_dominated_by_normal() {
    let reps = 40_000;
    let stats = simulate_statistic(&example(), Statistic::W, 10, reps, 22).unwrap();
    for k in 0..=12 {
        let t = -2.0 + 0.25 * k as f64;
        let vals: Vec<f64> = stats.iter().map(|s| (s - t).max(0.0).powi(5)).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let z = normal_partial_moment(5, t);
        assert!(mean <= z + 3.0 * (var / reps as f64).sqrt(), "t = {t}: {mean} > {z}");
    }
}

#[test]
fn s_y_tail_respects_bernoulli_bound() {
    let (p, _) = asymmetry_certificate(&example()).unwrap();
    let lambda = lambda_star(p).unwrap();
    let reps = 40_000;
    let stats = simulate_statistic(&example(), Statistic::Y { lambda }, 10, reps, 23).unwrap();
    let model = bernoulli_tail_model(10, p, lambda).unwrap();
    for k in 0..40 {
        let x = -1.0 + 0.125 * k as f64;
        let emp = stats.iter().filter(|&&s| s >= x).count() as f64 / reps as f64;
        let b = model.bound(x);
        assert!(emp <= b + 3.0 * (b * (1.0 - b) / reps as f64).sqrt() + 1e-12, "x = {x}: {emp} > {b}");
    }
}

#[test]
fn simulation_is_deterministic() {
    let a = simulate_statistic(&example(), Statistic::W, 5, 100, 3).unwrap();
    assert_eq!(a, simulate_statistic(&example(), Statistic::W, 5, 100, 3).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistics_are_scale_invariant(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..12),
        c in 0.01f64..100.0,
        lambda in 0.5f64..3.0,
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let rs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let cx: Vec<f64> = xs.iter().map(|v| v * c).collect();
        let cr: Vec<f64> = rs.iter().map(|v| v * c).collect();
        let (a, b) = (s_w(&xs, &rs).unwrap(), s_w(&cx, &cr).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        let (a, b) = (s_y(&xs, &rs, lambda).unwrap(), s_y(&cx, &cr, lambda).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn bounds_are_monotone(x in -10.0f64..10.0, d in 0.0f64..3.0, n in 1usize..40, p in 0.05f64..0.95) {
        prop_assert!(gaussian_bound(x + d) <= gaussian_bound(x));
        let lambda = lambda_star(p).unwrap();
        let m = bernoulli_tail_model(n, p, lambda).unwrap();
        prop_assert!(m.bound(x + d) <= m.bound(x) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&m.bound(x)));
    }

    #[test]
    fn lc_tail_is_least_log_concave_majorant(n in 1usize..60, p in 0.02f64..0.98, lambda in 1.0f64..3.0) {
        let m = bernoulli_tail_model(n, p, lambda).unwrap();
        for (s, l) in m.support.iter().zip(&m.lc_tail) {
            prop_assert!(l.1 >= s.1 * (1.0 - 1e-12));
        }
        // Endpoints are always hull contacts.
        prop_assert_eq!(m.lc_tail[0].1, 1.0);
        let last = m.support.len() - 1;
        prop_assert!((m.lc_tail[last].1 / m.support[last].1 - 1.0).abs() < 1e-9);
        // Log-concave on the grid: second differences of log over unequal
        // spacing are nonpositive (the grid is uniform here).
        let logs: Vec<f64> = m.lc_tail.iter().map(|v| v.1.ln()).collect();
        for w in logs.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] <= 1e-9 * w[0].abs().max(w[2].abs()).max(1.0));
        }
        // Off-grid values dominate the step tail.
        for k in 0..=4 * n {
            let x = m.support[0].0 + (m.support[last].0 - m.support[0].0) * k as f64 / (4 * n) as f64 + 1e-9;
            prop_assert!(m.lc(x) >= m.tail(x) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn lambda_star_shape(k in 1u32..999) {
        let p = k as f64 / 1000.0;
        let l = lambda_star(p).unwrap();
        prop_assert!(l >= 1.0 - 1e-15);
        if p >= 0.5 {
            prop_assert_eq!(l, 1.0);
        }
        let l2 = lambda_star(p + 1e-7).unwrap();
        prop_assert!((l - l2).abs() < 1e-3);
    }

    #[test]
    fn rademacher_sums_obey_hoeffding(raw in prop::collection::vec(-1.0f64..1.0, 1..=12)) {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let a: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        for (x, tail) in rademacher_tail(&a).unwrap() {
            prop_assert!(tail <= (-x * x / 2.0).exp() + 1e-12 || x <= 0.0, "x = {}: {}", x, tail);
        }
    }
}

#[test]
fn rademacher_tail_small_case() {
    let a = [0.6, 0.8];
    let t = rademacher_tail(&a).unwrap();
    let want = [(-1.4, 1.0), (-0.2, 0.75), (0.2, 0.5), (1.4, 0.25)];
    for (got, w) in t.iter().zip(want) {
        assert!(close(got.0, w.0, 1e-15) && got.1 == w.1);
    }
    assert!(normal_tail(0.0) == 0.5);
}
