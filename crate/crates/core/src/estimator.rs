//! Plug-in reciprocating functions from samples and bootstrap-calibrated
//! pivots for the mean.
//!
//! The pivot at `theta` is a self-normalized sum whose numerator is
//! `sum x_i - n theta`. Partners `r_i` come from the recentred empirical law.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disintegration::sharded;
use crate::measure::{MeasureError, ZeroMeanMeasure};
use crate::rng;
use crate::selfnorm::{self, BernoulliTailModel, SelfNormError, Statistic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("need at least {min} resamples, got {got}")]
    TooFewResamples { got: usize, min: usize },
    #[error("only {valid} of {total} resamples gave a finite pivot")]
    DegenerateResamples { valid: usize, total: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    SelfNorm(#[from] SelfNormError),
}

type Result<T> = std::result::Result<T, EstimatorError>;

pub const MIN_RESAMPLES: usize = 100;
pub const DEFAULT_RESAMPLES: usize = 2000;

/// How the denominator reacts to `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// Denominator from the shifted points `x_i - theta` and their fitted
    /// partners.
    #[default]
    Recompute,
    /// Denominator frozen at `theta = mean`; the pivot is linear in `theta`.
    FixedDenominator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Percentile band of the bootstrap pivot distribution.
    #[default]
    BootstrapPercentile,
    /// Band from the conservative tail bounds of the self-normalized sums.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotOptions {
    pub mode: ThetaMode,
    /// Seed for the atom randomizations `u_i`.
    pub seed: u64,
}

impl Default for PivotOptions {
    fn default() -> Self {
        PivotOptions { mode: ThetaMode::Recompute, seed: 0 }
    }
}

/// Recentred empirical law of the sample; its reciprocating function is the
/// plug-in estimate.
pub fn fit_reciprocal(xs: &[f64]) -> Result<ZeroMeanMeasure> {
    Ok(ZeroMeanMeasure::from_samples(xs, true)?)
}

/// The fitted law with, for each sample point, its centred location and a
/// partner `r(c_i, u_i)`.
#[derive(Debug, Clone)]
struct FittedPairs {
    mean: f64,
    centred: Vec<f64>,
    partners: Vec<f64>,
}

fn fitted_pairs(xs: &[f64], us: &[f64]) -> Result<FittedPairs> {
    let fit = fit_reciprocal(xs)?;
    let atoms = fit.atoms().expect("empirical laws are discrete");
    let mut uniq = xs.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let centred: Vec<f64> = if uniq.len() == atoms.len() {
        // Use the fitted atom itself so that rounding never lands between atoms.
        xs.iter()
            .map(|x| atoms[uniq.partition_point(|v| v < x)].0)
            .collect()
    } else {
        xs.iter()
            .map(|x| {
                let c = x - mean;
                let k = atoms.partition_point(|a| a.0 < c).min(atoms.len() - 1);
                let j = k.saturating_sub(1);
                if (atoms[j].0 - c).abs() < (atoms[k].0 - c).abs() {
                    atoms[j].0
                } else {
                    atoms[k].0
                }
            })
            .collect()
    };
    let partners = centred.iter().zip(us).map(|(c, u)| fit.reciprocate(*c, *u)).collect();
    Ok(FittedPairs { mean, centred, partners })
}

fn uniforms<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(Open01)).collect()
}

fn statistic(xs: &[f64], rs: &[f64], kind: Statistic) -> Result<f64> {
    Ok(match kind {
        Statistic::W => selfnorm::s_w(xs, rs)?,
        Statistic::Y { lambda } => selfnorm::s_y(xs, rs, lambda)?,
    })
}

fn pivot_from(pairs: &FittedPairs, theta: f64, kind: Statistic, mode: ThetaMode) -> Result<f64> {
    let n = pairs.centred.len() as f64;
    match mode {
        ThetaMode::Recompute => {
            let shifted: Vec<f64> = pairs.centred.iter().map(|c| c + pairs.mean - theta).collect();
            statistic(&shifted, &pairs.partners, kind)
        }
        ThetaMode::FixedDenominator => {
            let (_, den) = match kind {
                Statistic::W => selfnorm::w_parts(&pairs.centred, &pairs.partners),
                Statistic::Y { lambda } => {
                    if !(lambda > 0.0 && lambda.is_finite()) {
                        return Err(SelfNormError::BadLambda(lambda).into());
                    }
                    selfnorm::y_parts(&pairs.centred, &pairs.partners, lambda)
                }
            };
            Ok(if den == 0.0 { 0.0 } else { n * (pairs.mean - theta) / den })
        }
    }
}

/// The approximate pivot at `theta`.
pub fn pivot(xs: &[f64], theta: f64, kind: Statistic, opts: PivotOptions) -> Result<f64> {
    let us = uniforms(&mut rng::stream(opts.seed, "pivot_u"), xs.len());
    let pairs = fitted_pairs(xs, &us)?;
    pivot_from(&pairs, theta, kind, opts.mode)
}

/// Pivot values along a grid of `theta`, sharing one fit.
pub fn pivot_curve(xs: &[f64], thetas: &[f64], kind: Statistic, opts: PivotOptions) -> Result<Vec<f64>> {
    let us = uniforms(&mut rng::stream(opts.seed, "pivot_u"), xs.len());
    let pairs = fitted_pairs(xs, &us)?;
    thetas.iter().map(|&t| pivot_from(&pairs, t, kind, opts.mode)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotRun {
    pub kind: Statistic,
    pub mode: ThetaMode,
    pub calibration: Calibration,
    pub level: f64,
    pub theta_grid: Vec<f64>,
    pub pivot_values: Vec<f64>,
    pub bootstrap_quantiles: (f64, f64),
    /// `None` when no grid point falls inside the band.
    pub ci: Option<(f64, f64)>,
    pub seed: u64,
    #[serde(rename = "B")]
    pub b: usize,
    /// Resamples that produced no pivot (constant resamples).
    pub dropped: usize,
}

impl PivotRun {
    pub fn covers(&self, theta: f64) -> bool {
        self.ci.is_some_and(|(lo, hi)| lo <= theta && theta <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub level: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub mode: ThetaMode,
    pub calibration: Calibration,
    /// Points in the reported `theta` grid.
    pub grid: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            level: 0.95,
            b: DEFAULT_RESAMPLES,
            seed: 0,
            mode: ThetaMode::Recompute,
            calibration: Calibration::BootstrapPercentile,
            grid: 201,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Smallest `x` with `bound(x) <= alpha`, for a nonincreasing bound.
fn bound_threshold(bound: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while bound(hi) > alpha {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn conservative_band(xs: &[f64], kind: Statistic, alpha: f64) -> Result<(f64, f64)> {
    match kind {
        Statistic::W => {
            let z = bound_threshold(selfnorm::gaussian_bound, alpha);
            Ok((-z, z))
        }
        Statistic::Y { lambda } => {
            let n = xs.len();
            let upper = |sample: &[f64]| -> Result<f64> {
                let (_, p) = selfnorm::asymmetry_certificate(&fit_reciprocal(sample)?)?;
                let min = selfnorm::lambda_star(p)?;
                if lambda < min {
                    return Err(SelfNormError::LambdaTooSmall { lambda, min }.into());
                }
                let model = BernoulliTailModel::new(n, p, lambda)?;
                Ok(bound_threshold(|x| model.bound(x), alpha))
            };
            let reflected: Vec<f64> = xs.iter().map(|x| -x).collect();
            Ok((-upper(&reflected)?, upper(xs)?))
        }
    }
}

/// First `theta` in `[a, b]` where `inside` flips, given it differs at the ends.
fn bisect_edge(inside: impl Fn(f64) -> bool, mut a: f64, mut b: f64) -> f64 {
    let at_a = inside(a);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if inside(mid) == at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Percentile-bootstrap confidence interval for the mean.
///
/// Each resample contributes the pivot at the original sample mean; the
/// interval collects the `theta` whose pivot falls inside the band.
pub fn bootstrap_ci(xs: &[f64], kind: Statistic, cfg: &BootstrapConfig) -> Result<PivotRun> {
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(EstimatorError::BadLevel(cfg.level));
    }
    if cfg.b < MIN_RESAMPLES {
        return Err(EstimatorError::TooFewResamples { got: cfg.b, min: MIN_RESAMPLES });
    }
    let n = xs.len();
    let opts = PivotOptions { mode: cfg.mode, seed: cfg.seed };
    let us = uniforms(&mut rng::stream(cfg.seed, "pivot_u"), n);
    let pairs = fitted_pairs(xs, &us)?;
    let mean = pairs.mean;
    let alpha = 1.0 - cfg.level;

    let (band, dropped) = match cfg.calibration {
        Calibration::BootstrapPercentile => {
            let draws: Vec<Option<f64>> = sharded(cfg.b, cfg.seed, "bootstrap", |rng, k| {
                let mut sample = vec![0.0; n];
                (0..k)
                    .map(|_| {
                        for s in sample.iter_mut() {
                            *s = xs[rng.random_range(0..n)];
                        }
                        let us = uniforms(rng, n);
                        let p = fitted_pairs(&sample, &us).and_then(|fp| pivot_from(&fp, mean, kind, opts.mode));
                        p.ok().filter(|v| v.is_finite())
                    })
                    .collect()
            });
            let mut pooled: Vec<f64> = draws.iter().flatten().copied().collect();
            if pooled.len() < MIN_RESAMPLES {
                return Err(EstimatorError::DegenerateResamples { valid: pooled.len(), total: cfg.b });
            }
            pooled.sort_by(f64::total_cmp);
            let band = (quantile(&pooled, alpha / 2.0), quantile(&pooled, 1.0 - alpha / 2.0));
            (band, cfg.b - pooled.len())
        }
        Calibration::Conservative => (conservative_band(xs, kind, alpha / 2.0)?, 0),
    };

    let spread = {
        let var = pairs.centred.iter().map(|c| c * c).sum::<f64>() / n as f64;
        var.sqrt() / (n as f64).sqrt()
    };
    let reach = band.0.abs().max(band.1.abs()).max(1.0).min(1e6);
    let inside = |t: f64| {
        pivot_from(&pairs, t, kind, opts.mode).map(|v| band.0 <= v && v <= band.1).unwrap_or(false)
    };
    let mut half = 4.0 * reach * spread.max(f64::MIN_POSITIVE);
    // Widen until both grid ends fall outside the band.
    for _ in 0..20 {
        if !inside(mean - half) && !inside(mean + half) {
            break;
        }
        half *= 2.0;
    }
    let grid = cfg.grid.max(3);
    let theta_grid: Vec<f64> = (0..grid).map(|i| mean - half + 2.0 * half * i as f64 / (grid - 1) as f64).collect();
    let pivot_values: Vec<f64> =
        theta_grid.iter().map(|&t| pivot_from(&pairs, t, kind, opts.mode)).collect::<Result<_>>()?;
    let flags: Vec<bool> = pivot_values.iter().map(|v| band.0 <= *v && *v <= band.1).collect();
    let ci = match (flags.iter().position(|&f| f), flags.iter().rposition(|&f| f)) {
        (Some(i), Some(j)) => {
            let lo = if i == 0 { theta_grid[0] } else { bisect_edge(inside, theta_grid[i - 1], theta_grid[i]) };
            let hi = if j + 1 == grid { theta_grid[j] } else { bisect_edge(inside, theta_grid[j], theta_grid[j + 1]) };
            Some((lo.min(hi), hi.max(lo)))
        }
        _ => None,
    };
    Ok(PivotRun {
        kind,
        mode: cfg.mode,
        calibration: cfg.calibration,
        level: cfg.level,
        theta_grid,
        pivot_values,
        bootstrap_quantiles: band,
        ci,
        seed: cfg.seed,
        b: cfg.b,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.5), 1.5);
        assert_eq!(quantile(&v, 1.0), 3.0);
        assert_eq!(quantile(&v, 0.0), 0.0);
    }

    #[test]
    fn gaussian_threshold_solves_bound() {
        let z = bound_threshold(selfnorm::gaussian_bound, 0.025);
        assert!((selfnorm::gaussian_bound(z) - 0.025).abs() < 1e-12);
    }
}
