//! Invariant suite run by `twopoint verify`: structural properties of a
//! measure and of its canonical disintegration.

use serde::{Deserialize, Serialize};

use crate::disintegration::{mixture_expect, uniformity_check, MixtureMode, Uniformity};
use crate::measure::{AtomTable, MeasureError, ZeroMeanMeasure};
use crate::numerics::ks_critical_99;
use crate::scalar::Scalar;

const FLOAT_RTOL: f64 = 1e-12;
const ANALYTIC_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed deviation (or the statistic, for KS checks).
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub backend: Option<String>,
    pub exact: bool,
    pub m: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub error: Option<ErrorInfo>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.failed == 0
    }

    /// Report for input that could not be turned into a measure.
    pub fn construction_error(e: &MeasureError) -> Self {
        VerifyReport {
            backend: None,
            exact: false,
            m: None,
            checks: Vec::new(),
            passed: 0,
            failed: 1,
            error: Some(ErrorInfo { kind: e.kind().to_string(), message: e.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Number of levels in `[0, m]` probed by the level checks.
    pub grid: usize,
    /// Sample size and seed for the Monte Carlo uniformity checks; skipped
    /// when `None`.
    pub monte_carlo: Option<(usize, u64)>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { grid: 50, monte_carlo: None }
    }
}

fn check(name: &str, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), passed: value <= tolerance, value, tolerance, detail: None }
}

fn flag(name: &str, passed: bool, detail: Option<String>) -> Check {
    Check { name: name.into(), passed, value: if passed { 0.0 } else { 1.0 }, tolerance: 0.0, detail }
}

/// `|a - b|`, or 0/1 for exact arithmetic where only equality counts.
fn gap<S: Scalar>(a: &S, b: &S) -> f64 {
    if S::EXACT {
        if a == b {
            0.0
        } else {
            (a.to_f64() - b.to_f64()).abs().max(f64::MIN_POSITIVE)
        }
    } else {
        (a.to_f64() - b.to_f64()).abs()
    }
}

fn table_checks<S: Scalar>(t: &AtomTable<S>, grid: usize, out: &mut Vec<Check>) {
    let tol = if S::EXACT { 0.0 } else { FLOAT_RTOL * t.m().to_f64().max(1.0) };

    let steps = S::from_f64(grid as f64).unwrap();
    let h_err = (0..=grid)
        .map(|k| {
            let h = t.m().clone() * S::from_f64(k as f64).unwrap() / steps.clone();
            let (plus, minus) = t.h_identity(&h);
            gap(&plus, &h).max(gap(&minus, &h))
        })
        .fold(0.0, f64::max);
    out.push(check("h_identity", h_err, tol));

    let d = t.decompose();
    out.push(check("decomposition_total_weight", gap(&d.total_weight(), &S::one()), tol));
    let rebuilt = d.reassemble();
    let original: Vec<(S, S)> = t.atoms().filter(|(x, _)| !x.is_zero()).map(|(x, p)| (x.clone(), p.clone())).collect();
    let rebuilt_nonzero: Vec<(S, S)> = rebuilt.iter().filter(|(x, _)| !x.is_zero()).cloned().collect();
    let reassembly = if original.len() != rebuilt_nonzero.len() {
        f64::INFINITY
    } else {
        original
            .iter()
            .zip(&rebuilt_nonzero)
            .map(|((x, p), (y, q))| gap(x, y).max(gap(p, q)))
            .fold(0.0, f64::max)
    };
    out.push(check("decomposition_reassembles", reassembly, tol));
    let mean_err = d
        .components
        .iter()
        .map(|c| gap(&(c.law.a.clone() * c.law.p_a.clone() + c.law.b.clone() * c.law.p_b.clone()), &S::zero()))
        .fold(0.0, f64::max);
    out.push(check("components_zero_mean", mean_err, tol));

    let (ex_r, _) = t.ratio_moments();
    out.push(check("ratio_x_over_r", gap(&ex_r, &-S::one()), tol));
}

fn level_checks(measure: &ZeroMeanMeasure, grid: usize, out: &mut Vec<Check>) {
    let m = measure.m();
    let tol = FLOAT_RTOL * m.max(1.0);
    let g_err = (measure.g(f64::INFINITY) - m).abs().max((measure.g(f64::NEG_INFINITY) - m).abs());
    out.push(check("g_terminal_equals_m", g_err, tol));

    let levels: Vec<f64> = (0..=grid).map(|k| m * k as f64 / grid as f64).collect();
    let plus: Vec<f64> = levels.iter().map(|&h| measure.x_plus(h).unwrap_or(f64::NAN)).collect();
    let minus: Vec<f64> = levels.iter().map(|&h| measure.x_minus(h).unwrap_or(f64::NAN)).collect();
    let monotone = plus.windows(2).all(|w| w[0] <= w[1])
        && minus.windows(2).all(|w| w[0] >= w[1])
        && plus.iter().all(|&x| x >= 0.0)
        && minus.iter().all(|&x| x <= 0.0);
    out.push(flag("x_pm_monotone", monotone, None));
}

fn probes(measure: &ZeroMeanMeasure) -> Vec<f64> {
    match measure.atoms() {
        Some(atoms) => atoms.into_iter().map(|a| a.0).collect(),
        None => (1..40).map(|k| measure.quantile(k as f64 / 40.0)).collect(),
    }
}

fn pointwise_checks(measure: &ZeroMeanMeasure, out: &mut Vec<Check>) {
    const US: [f64; 3] = [0.1, 0.5, 0.9];
    let xs = probes(measure);
    let bad: Vec<String> = xs
        .iter()
        .flat_map(|&x| US.map(|u| (x, u)))
        .filter(|&(x, u)| x * measure.reciprocate(x, u) > 0.0)
        .map(|(x, u)| format!("r({x}, {u}) has the sign of x"))
        .collect();
    out.push(flag("reciprocate_opposite_sign", bad.is_empty(), bad.first().cloned()));

    let reg_err = xs
        .iter()
        .flat_map(|&x| US.map(|u| (measure.regularize(x, u) - x).abs() / x.abs().max(1.0)))
        .fold(0.0, f64::max);
    let tol = if measure.is_discrete() { FLOAT_RTOL } else { ANALYTIC_RTOL };
    out.push(check("regularize_fixes_support", reg_err, tol));
}

fn mixture_checks(measure: &ZeroMeanMeasure, out: &mut Vec<Check>) {
    let tests: [(&str, fn(f64) -> f64); 4] = [
        ("x_sq", |x| x * x),
        ("abs", f64::abs),
        ("pos", |x| f64::from(u8::from(x > 0.0))),
        ("neg", |x| f64::from(u8::from(x < 0.0))),
    ];
    let rtol = if measure.is_discrete() { FLOAT_RTOL } else { ANALYTIC_RTOL };
    for (name, g) in tests {
        let vals: Result<Vec<f64>, _> = MixtureMode::ALL.iter().map(|&mode| mixture_expect(measure, &g, mode)).collect();
        let name = format!("mixture_modes_agree_{name}");
        match vals {
            Ok(v) => {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                out.push(check(&name, hi - lo, rtol * hi.abs().max(1.0)));
            }
            Err(e) => out.push(flag(&name, false, Some(e.to_string()))),
        }
    }
}

fn uniformity_checks(measure: &ZeroMeanMeasure, n: usize, seed: u64, out: &mut Vec<Check>) {
    let crit = ks_critical_99(n);
    for (name, which) in [("uniformity_g_tilde_y", Uniformity::GTildeY), ("uniformity_f_tilde_x", Uniformity::FTildeX)] {
        out.push(check(name, uniformity_check(measure, which, n, seed), crit));
    }
}

pub fn verify(measure: &ZeroMeanMeasure, opts: &VerifyOptions) -> VerifyReport {
    let grid = opts.grid.max(1);
    let mut checks = Vec::new();
    level_checks(measure, grid, &mut checks);
    pointwise_checks(measure, &mut checks);
    if let Some(t) = measure.exact() {
        table_checks(t, grid, &mut checks);
    } else if let Some(t) = measure.table() {
        table_checks(t, grid, &mut checks);
    }
    mixture_checks(measure, &mut checks);
    if let Some((n, seed)) = opts.monte_carlo {
        uniformity_checks(measure, n, seed, &mut checks);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport {
        backend: Some(format!("{:?}", measure.backend()).to_lowercase()),
        exact: measure.exact().is_some(),
        m: Some(measure.m()),
        failed: checks.len() - passed,
        passed,
        checks,
        error: None,
    }
}
