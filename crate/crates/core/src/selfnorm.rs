//! Asymmetry-corrected self-normalized sums and their conservative tail bounds.
//!
//! Given pairs `(x_i, r_i)` with `r_i = r(x_i, u_i)`:
//!
//! * `S_W = sum x_i / (sqrt(sum W_i^2) / 2)` with `W_i = |x_i - r_i|`, bounded by
//!   `c50 * P(Z >= x)`;
//! * `S_{Y,lambda} = sum x_i / (sum Y_i^lambda)^(1/(2 lambda))` with
//!   `Y_i = |x_i r_i|`, bounded by `c30 * P^LC(T_n >= x)` under bounded
//!   asymmetry and `lambda >= lambda_*(p)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disintegration::{sharded, PairSampler};
use crate::measure::{AtomTable, Repr, ZeroMeanMeasure};
use crate::numerics::{ln_gamma, normal_tail};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfNormError {
    #[error("xs has {xs} entries but rs has {rs}")]
    LengthMismatch { xs: usize, rs: usize },
    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("p must lie in (0, 1), got {0}")]
    BadP(f64),
    #[error("n = {0} exceeds the exact binomial limit of 1e6")]
    TooLarge(usize),
    #[error("lambda = {lambda} is below lambda_*(p) = {min}")]
    LambdaTooSmall { lambda: f64, min: f64 },
    #[error("pair {index}: x/|r| = {ratio} exceeds (1-p)/p = {bound}")]
    AsymmetryViolated { index: usize, ratio: f64, bound: f64 },
    #[error("a positive atom has an unbounded ratio x/|r|")]
    InfiniteGamma,
    #[error("operation needs a discrete measure")]
    NotDiscrete,
    #[error("non-finite input {0}")]
    NonFinite(f64),
}

type Result<T> = std::result::Result<T, SelfNormError>;

pub const MAX_BINOMIAL_N: usize = 1_000_000;

/// `5! (e/5)^5`.
pub fn c50() -> f64 {
    120.0 * (std::f64::consts::E / 5.0).powi(5)
}

/// `2 e^3 / 9`.
pub fn c30() -> f64 {
    2.0 * std::f64::consts::E.powi(3) / 9.0
}

fn check_pairs(xs: &[f64], rs: &[f64]) -> Result<()> {
    if xs.len() != rs.len() {
        return Err(SelfNormError::LengthMismatch { xs: xs.len(), rs: rs.len() });
    }
    if let Some(&v) = xs.iter().chain(rs).find(|v| !v.is_finite()) {
        return Err(SelfNormError::NonFinite(v));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Sum and scale of `S_W`.
pub(crate) fn w_parts(xs: &[f64], rs: &[f64]) -> (f64, f64) {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().zip(rs).map(|(x, r)| (x - r) * (x - r)).sum();
    (sum, 0.5 * sq.sqrt())
}

pub(crate) fn y_parts(xs: &[f64], rs: &[f64], lambda: f64) -> (f64, f64) {
    let sum: f64 = xs.iter().sum();
    // Work with sqrt(Y) = sqrt|x| sqrt|r| and factor out the largest, so
    // neither x r nor Y^lambda overflows.
    let zs: Vec<f64> = xs.iter().zip(rs).map(|(x, r)| x.abs().sqrt() * r.abs().sqrt()).collect();
    let top = zs.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return (sum, 0.0);
    }
    let s: f64 = zs.iter().map(|z| (z / top).powf(2.0 * lambda)).sum();
    (sum, top * s.powf(1.0 / (2.0 * lambda)))
}

pub fn s_w(xs: &[f64], rs: &[f64]) -> Result<f64> {
    check_pairs(xs, rs)?;
    let (sum, scale) = w_parts(xs, rs);
    Ok(ratio(sum, scale))
}

pub fn s_y(xs: &[f64], rs: &[f64], lambda: f64) -> Result<f64> {
    check_pairs(xs, rs)?;
    check_lambda(lambda)?;
    let (sum, scale) = y_parts(xs, rs, lambda);
    Ok(ratio(sum, scale))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(SelfNormError::BadLambda(lambda))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(SelfNormError::BadP(p))
    }
}

/// Smallest admissible `lambda` for asymmetry level `p`.
pub fn lambda_star(p: f64) -> Result<f64> {
    check_p(p)?;
    if p >= 0.5 {
        return Ok(1.0);
    }
    Ok((1.0 + p + 2.0 * p * p) / (2.0 * ((p - p * p).sqrt() + 2.0 * p * p)))
}

/// `min(1, c50 * P(Z >= x))`.
pub fn gaussian_bound(x: f64) -> f64 {
    (c50() * normal_tail(x)).min(1.0)
}

/// Law of `T_n = (Z_1 + ... + Z_n) / n^(1/(2 lambda))` for standardized
/// Bernoulli(`p`) summands, and the least log-concave majorant of its tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BernoulliTailModel {
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    /// `(t_k, P(T_n >= t_k))` over the `n + 1` support points.
    pub support: Vec<(f64, f64)>,
    /// `(t_k, P^LC(T_n >= t_k))`.
    pub lc_tail: Vec<(f64, f64)>,
    #[serde(skip)]
    log_tail: Vec<f64>,
    /// Hull vertices as `(t, log P)`.
    #[serde(skip)]
    hull: Vec<(f64, f64)>,
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Upper concave hull of points sorted by abscissa (monotone chain).
fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn interpolate(hull: &[(f64, f64)], t: f64) -> f64 {
    let k = hull.partition_point(|v| v.0 < t);
    if k == 0 {
        return hull[0].1;
    }
    let (a, b) = (hull[k - 1], hull[k]);
    if b.0 == t {
        return b.1;
    }
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

impl BernoulliTailModel {
    pub fn new(n: usize, p: f64, lambda: f64) -> Result<Self> {
        check_p(p)?;
        check_lambda(lambda)?;
        if n == 0 || n > MAX_BINOMIAL_N {
            return Err(SelfNormError::TooLarge(n));
        }
        let q = 1.0 - p;
        let nf = n as f64;
        let scale = (p * q).sqrt() * nf.powf(1.0 / (2.0 * lambda));
        let t: Vec<f64> = (0..=n).map(|k| (k as f64 - nf * p) / scale).collect();
        let (lp, lq) = (p.ln(), q.ln());
        let ln_n = ln_gamma(nf + 1.0);
        let mut log_tail = vec![0.0; n + 1];
        let mut acc = f64::NEG_INFINITY;
        for k in (0..=n).rev() {
            let kf = k as f64;
            let lpmf = ln_n - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * lp + (nf - kf) * lq;
            acc = log_add(acc, lpmf);
            log_tail[k] = acc.min(0.0);
        }
        log_tail[0] = 0.0;
        let points: Vec<(f64, f64)> = t.iter().cloned().zip(log_tail.iter().cloned()).collect();
        let hull = upper_hull(&points);
        let support = points.iter().map(|&(t, l)| (t, l.exp())).collect();
        let lc_tail = t.iter().map(|&x| (x, interpolate(&hull, x).exp())).collect();
        Ok(BernoulliTailModel { n, p, lambda, support, lc_tail, log_tail, hull })
    }

    /// `P(T_n >= x)`.
    pub fn tail(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|s| s.0 < x);
        if k > self.n {
            0.0
        } else {
            self.log_tail[k].exp()
        }
    }

    /// `P^LC(T_n >= x)`: 1 left of the support, 0 right of it, log-linear
    /// between hull vertices.
    pub fn lc(&self, x: f64) -> f64 {
        let (lo, hi) = (self.support[0].0, self.support[self.n].0);
        if x <= lo {
            1.0
        } else if x > hi {
            0.0
        } else {
            interpolate(&self.hull, x).exp()
        }
    }

    /// `min(1, c30 * P^LC(T_n >= x))`.
    pub fn bound(&self, x: f64) -> f64 {
        (c30() * self.lc(x)).min(1.0)
    }
}

pub fn bernoulli_tail_model(n: usize, p: f64, lambda: f64) -> Result<BernoulliTailModel> {
    BernoulliTailModel::new(n, p, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    GaussianC50,
    BernoulliC30Lc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c: f64,
    /// `lambda` for the Bernoulli bound.
    pub extra: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_conservative: f64,
    pub bound_kind: BoundKind,
    pub constants_used: Constants,
    pub n: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TestMode {
    Gaussian,
    Bernoulli { p: f64, lambda: f64 },
}

/// Largest `x_i / |r_i|` over positive `x_i` (infinite if some `r_i = 0`).
pub fn max_asymmetry_ratio(xs: &[f64], rs: &[f64]) -> Option<(usize, f64)> {
    xs.iter()
        .zip(rs)
        .enumerate()
        .filter(|(_, (x, _))| **x > 0.0)
        .map(|(i, (x, r))| (i, if *r == 0.0 { f64::INFINITY } else { x / r.abs() }))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn conservative_test(xs: &[f64], rs: &[f64], mode: TestMode) -> Result<TestReport> {
    check_pairs(xs, rs)?;
    let n = xs.len();
    let mut diagnostics = BTreeMap::new();
    match mode {
        TestMode::Gaussian => {
            let (sum, scale) = w_parts(xs, rs);
            let statistic = ratio(sum, scale);
            diagnostics.insert("sum".into(), sum);
            diagnostics.insert("scale".into(), scale);
            Ok(TestReport {
                statistic,
                p_conservative: gaussian_bound(statistic),
                bound_kind: BoundKind::GaussianC50,
                constants_used: Constants { c: c50(), extra: None },
                n,
                diagnostics,
            })
        }
        TestMode::Bernoulli { p, lambda } => {
            check_lambda(lambda)?;
            let min = lambda_star(p)?;
            if lambda < min {
                return Err(SelfNormError::LambdaTooSmall { lambda, min });
            }
            let bound = (1.0 - p) / p;
            let worst = max_asymmetry_ratio(xs, rs);
            for (index, (x, r)) in xs.iter().zip(rs).enumerate() {
                let ratio = if *r == 0.0 { f64::INFINITY } else { x / r.abs() };
                if *x > 0.0 && ratio > bound * (1.0 + 1e-12) {
                    return Err(SelfNormError::AsymmetryViolated { index, ratio, bound });
                }
            }
            let (sum, scale) = y_parts(xs, rs, lambda);
            let statistic = ratio(sum, scale);
            let model = BernoulliTailModel::new(n.max(1), p, lambda)?;
            diagnostics.insert("sum".into(), sum);
            diagnostics.insert("scale".into(), scale);
            diagnostics.insert("lambda_star".into(), min);
            diagnostics.insert("p".into(), p);
            diagnostics.insert("max_ratio".into(), worst.map_or(0.0, |w| w.1));
            diagnostics.insert("lc_tail".into(), model.lc(statistic));
            Ok(TestReport {
                statistic,
                p_conservative: model.bound(statistic),
                bound_kind: BoundKind::BernoulliC30Lc,
                constants_used: Constants { c: c30(), extra: Some(lambda) },
                n,
                diagnostics,
            })
        }
    }
}

fn certificate_of<S: Scalar>(t: &AtomTable<S>) -> Result<S> {
    let mut gamma: Option<S> = None;
    for (i, segs) in t.u_segments().into_iter().enumerate() {
        let x = &t.locs[i];
        if *x <= S::zero() {
            continue;
        }
        for s in segs.into_iter().filter(|s| s.u_hi > s.u_lo) {
            if s.partner.is_zero() {
                return Err(SelfNormError::InfiniteGamma);
            }
            let g = x.clone() / s.partner.abs_val();
            if gamma.as_ref().is_none_or(|cur| g > *cur) {
                gamma = Some(g);
            }
        }
    }
    gamma.ok_or(SelfNormError::InfiniteGamma)
}

/// `(p, gamma)` with `gamma = ess sup x / |r(x, U)|` over `x > 0` and
/// `p = 1 / (1 + gamma)`, so that `X / |r| <= (1 - p) / p` almost surely.
pub fn asymmetry_certificate(measure: &ZeroMeanMeasure) -> Result<(f64, f64)> {
    let gamma = match &measure.repr {
        Repr::Exact { exact, .. } => certificate_of(&**exact)?.to_f64(),
        Repr::Float(t) => certificate_of(&**t)?,
        Repr::Analytic(_) => return Err(SelfNormError::NotDiscrete),
    };
    Ok((1.0 / (1.0 + gamma), gamma))
}

pub fn asymmetry_certificate_exact(measure: &ZeroMeanMeasure) -> Result<(Rational, Rational)> {
    let t = measure.exact().ok_or(SelfNormError::NotDiscrete)?;
    let gamma = certificate_of(t)?;
    let p = Rational::from_int(1) / (Rational::from_int(1) + gamma.clone());
    Ok((p, gamma))
}

/// Exact law of `sum eps_i a_i` for Rademacher signs: distinct values in
/// increasing order with `P(sum >= value)`.
pub fn rademacher_tail(a: &[f64]) -> Result<Vec<(f64, f64)>> {
    const MAX_TERMS: usize = 24;
    if a.len() > MAX_TERMS {
        return Err(SelfNormError::TooLarge(a.len()));
    }
    if let Some(&v) = a.iter().find(|v| !v.is_finite()) {
        return Err(SelfNormError::NonFinite(v));
    }
    let count = 1usize << a.len();
    let mut sums: Vec<f64> = (0..count)
        .map(|mask| a.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { *v } else { -*v }).sum())
        .collect();
    sums.sort_by(f64::total_cmp);
    let tol = 1e-12 * a.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < count {
        let v = sums[i];
        out.push((v, (count - i) as f64 / count as f64));
        while i < count && sums[i] - v <= tol {
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Statistic {
    W,
    Y { lambda: f64 },
}

/// `reps` seeded replications of the statistic on `n` i.i.d. pairs from `measure`.
pub fn simulate_statistic(measure: &ZeroMeanMeasure, stat: Statistic, n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if let Statistic::Y { lambda } = stat {
        check_lambda(lambda)?;
    }
    let sampler = PairSampler::new(measure);
    Ok(sharded(reps, seed, "simulate_statistic", |rng, k| {
        let mut xs = vec![0.0; n];
        let mut rs = vec![0.0; n];
        (0..k)
            .map(|_| {
                for j in 0..n {
                    let s = sampler.draw(rng);
                    xs[j] = s.x;
                    rs[j] = s.r;
                }
                let (sum, scale) = match stat {
                    Statistic::W => w_parts(&xs, &rs),
                    Statistic::Y { lambda } => y_parts(&xs, &rs, lambda),
                };
                ratio(sum, scale)
            })
            .collect()
    }))
}
