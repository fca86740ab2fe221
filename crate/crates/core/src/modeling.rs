//! Reciprocating curves of non-atomic laws with connected support:
//! parametric families, the asymmetry-pattern construction, and validators
//! for curves and for candidate `x_+` / `x_-` pairs.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{GCurveLaw, MeasureError, ZeroMeanMeasure};
use crate::numerics::{increasing_inverse, integrate};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelingError {
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("alpha must lie in [-1, 1], got {0}")]
    BadAlpha(f64),
    #[error("support needs a_minus < 0 < a_plus, got [{0}, {1}]")]
    BadSupport(f64, f64),
    #[error("pattern is not strictly Lip(1): slope {slope} on [{w1}, {w2}]")]
    Lip1Violated { w1: f64, w2: f64, slope: f64 },
    #[error("pattern violates {0}")]
    BadPattern(String),
    #[error("not a valid reciprocating curve: {0}")]
    NotValidCurve(String),
    #[error("characterization failed: {}", .0.join("; "))]
    CharacterizationFailed(Vec<String>),
    #[error("unknown family spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

type Result<T> = std::result::Result<T, ModelingError>;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A deterministic reciprocating function with support `[a_minus, a_plus]`.
#[derive(Clone)]
pub struct ReciprocatingCurve {
    pub a_minus: f64,
    pub a_plus: f64,
    pub label: String,
    f: RealFn,
    /// Apply `r = a_plus` left of `a_minus` and `r = a_minus` right of `a_plus`.
    extend: bool,
    scale: f64,
    smooth_at_zero: bool,
}

impl fmt::Debug for ReciprocatingCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReciprocatingCurve({}, [{}, {}])", self.label, self.a_minus, self.a_plus)
    }
}

fn check_support(a_minus: f64, a_plus: f64) -> Result<()> {
    if a_minus < 0.0 && a_plus > 0.0 {
        Ok(())
    } else {
        Err(ModelingError::BadSupport(a_minus, a_plus))
    }
}

fn check_scale(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(ModelingError::BadScale(c))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ModelingError::BadAlpha(alpha))
    }
}

impl ReciprocatingCurve {
    fn family(a_minus: f64, a_plus: f64, scale: f64, label: String, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ReciprocatingCurve { a_minus, a_plus, label, f: Arc::new(f), extend: true, scale, smooth_at_zero: true }
    }

    /// A user-supplied curve, evaluated as given on the whole line.
    pub fn custom(a_minus: f64, a_plus: f64, f: RealFn) -> Result<Self> {
        check_support(a_minus, a_plus)?;
        let scale = [a_minus.abs(), a_plus].into_iter().filter(|v| v.is_finite()).fold(1.0, f64::min);
        Ok(ReciprocatingCurve { a_minus, a_plus, label: "custom".into(), f, extend: false, scale, smooth_at_zero: true })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.extend {
            if x <= self.a_minus {
                return self.a_plus;
            }
            if x >= self.a_plus {
                return self.a_minus;
            }
        }
        (self.f)(x)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Whether the family is differentiable at 0 (so `r'(0) = -1` applies).
    pub fn smooth_at_zero(&self) -> bool {
        self.smooth_at_zero
    }

    /// `n` interior points of `[a_minus, a_plus]`, clipped to `[-L, L]` with
    /// `L = 20 * scale`.
    pub fn probe_grid(&self, n: usize) -> Vec<f64> {
        let l = 20.0 * self.scale;
        let lo = self.a_minus.max(-l);
        let hi = self.a_plus.min(l);
        (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect()
    }

    /// Sampled `(x, r(x))` over the probe grid.
    pub fn table(&self, n: usize) -> Vec<(f64, f64)> {
        self.probe_grid(n).into_iter().map(|x| (x, self.eval(x))).collect()
    }

    /// `r'(0)` by central differences with Richardson extrapolation.
    pub fn derivative_at_zero(&self) -> f64 {
        let d = |h: f64| (self.eval(h) - self.eval(-h)) / (2.0 * h);
        let h = [1e-3, 1e-4, 1e-5].map(|s| s * self.scale);
        let r1 = (100.0 * d(h[1]) - d(h[0])) / 99.0;
        let r2 = (100.0 * d(h[2]) - d(h[1])) / 99.0;
        if (r1 - r2).abs() < 1e-6 {
            r2
        } else {
            d(h[2])
        }
    }
}

/// Shape parameter of the power family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerShape {
    P(f64),
    /// `p -> +inf` with `c / p -> lambda`.
    PlusInfinity,
    /// `p -> -inf` with `c / p -> -lambda`.
    MinusInfinity,
    /// `c -> 0`, `p -> 1` with `c^(p-1) -> kappa`.
    Kink,
}

/// The power family `r_{p,c}`. The second argument is the scale `c`, the
/// limit scale `lambda` for the infinite shapes, and `kappa` for the kink.
pub fn power_family(shape: PowerShape, c: f64) -> Result<ReciprocatingCurve> {
    check_scale(c)?;
    let inf = f64::INFINITY;
    Ok(match shape {
        PowerShape::P(p) if p == 0.0 => ReciprocatingCurve::family(-inf, inf, c, format!("power(p=0, c={c})"), move |x| {
            if x >= 0.0 {
                -c * (x / c).ln_1p()
            } else {
                c * (-x / c).exp_m1()
            }
        }),
        PowerShape::P(p) => {
            if !p.is_finite() {
                return Err(ModelingError::BadSpec(format!("power shape {p}")));
            }
            let a_minus = if p < 0.0 { c / p } else { -inf };
            ReciprocatingCurve::family(a_minus, inf, c, format!("power(p={p}, c={c})"), move |x| {
                if x >= 0.0 {
                    -(c / p) * (p * (x / c).ln_1p()).exp_m1()
                } else if p * x >= c {
                    inf
                } else {
                    c * ((-p * x / c).ln_1p() / p).exp_m1()
                }
            })
        }
        PowerShape::PlusInfinity => ReciprocatingCurve::family(-inf, inf, c, format!("power(p=inf, lambda={c})"), move |x| {
            if x >= 0.0 {
                -c * (x / c).exp_m1()
            } else {
                c * (-x / c).ln_1p()
            }
        }),
        PowerShape::MinusInfinity => ReciprocatingCurve::family(-c, inf, c, format!("power(p=-inf, lambda={c})"), move |x| {
            if x >= 0.0 {
                c * (-x / c).exp_m1()
            } else {
                -c * (x / c).ln_1p()
            }
        }),
        PowerShape::Kink => {
            let mut curve = ReciprocatingCurve::family(-inf, inf, 1.0, format!("power_kink(kappa={c})"), move |x| {
                if x >= 0.0 {
                    -x / c
                } else {
                    -c * x
                }
            });
            curve.smooth_at_zero = c == 1.0;
            curve
        }
    })
}

/// `r_{alpha,c}` for the pattern `a(w) = alpha w^2 / (c + w)`.
pub fn hyperbolic_family(alpha: f64, c: f64) -> Result<ReciprocatingCurve> {
    check_alpha(alpha)?;
    check_scale(c)?;
    if alpha.abs() == 1.0 {
        let mut curve = from_asymmetry_pattern(hyperbolic_pattern(alpha, c)?)?;
        curve.label = format!("hyperbolic(alpha={alpha}, c={c})");
        return Ok(curve);
    }
    let inf = f64::INFINITY;
    Ok(ReciprocatingCurve::family(-inf, inf, c, format!("hyperbolic(alpha={alpha}, c={c})"), move |x| {
        if x.is_infinite() {
            return -x;
        }
        // The closed form with the numerator rationalized.
        let root = ((c + 2.0 * x.abs()).powi(2) + 8.0 * alpha * c * x).sqrt();
        -2.0 * x * (c + x.abs() - alpha * x) / (c + 2.0 * alpha * x + root)
    }))
}

pub fn hyperbolic_pattern(alpha: f64, c: f64) -> Result<AsymmetryPattern> {
    check_alpha(alpha)?;
    check_scale(c)?;
    let inf = f64::INFINITY;
    let (a_minus, a_plus) = if alpha == 1.0 {
        (-c / 2.0, inf)
    } else if alpha == -1.0 {
        (-inf, c / 2.0)
    } else {
        (-inf, inf)
    };
    AsymmetryPattern::new(Arc::new(move |w| alpha * w * w / (c + w)), a_minus, a_plus, c)
}

pub fn cubic_rate_pattern(alpha: f64, c: f64) -> Result<AsymmetryPattern> {
    check_alpha(alpha)?;
    check_scale(c)?;
    let k = 8.0 * alpha * c / (3.0 * 3f64.sqrt());
    let inf = f64::INFINITY;
    AsymmetryPattern::new(Arc::new(move |w| if w.is_infinite() { k } else { k * w * w / (c * c + w * w) }), -inf, inf, c)
}

/// `r_{alpha,c}` for the pattern `a(w) = 8 alpha c / (3 sqrt 3) * w^2 / (c^2 + w^2)`.
pub fn cubic_rate_family(alpha: f64, c: f64) -> Result<ReciprocatingCurve> {
    let mut curve = from_asymmetry_pattern(cubic_rate_pattern(alpha, c)?)?;
    curve.label = format!("cubic_rate(alpha={alpha}, c={c})");
    Ok(curve)
}

/// An asymmetry pattern `a: [0, a_plus - a_minus) -> R` with
/// `x + r(x) = a(|x - r(x)|)`.
#[derive(Clone)]
pub struct AsymmetryPattern {
    pub a_minus: f64,
    pub a_plus: f64,
    a_fn: RealFn,
    scale: f64,
}

impl fmt::Debug for AsymmetryPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AsymmetryPattern([{}, {}])", self.a_minus, self.a_plus)
    }
}

impl AsymmetryPattern {
    pub fn new(a_fn: RealFn, a_minus: f64, a_plus: f64, scale: f64) -> Result<Self> {
        check_support(a_minus, a_plus)?;
        check_scale(scale)?;
        Ok(AsymmetryPattern { a_minus, a_plus, a_fn, scale })
    }

    pub fn eval(&self, w: f64) -> f64 {
        (self.a_fn)(w)
    }

    /// `a_plus - a_minus`.
    pub fn width_limit(&self) -> f64 {
        self.a_plus - self.a_minus
    }

    pub fn xi(&self, w: f64) -> f64 {
        0.5 * (w + self.eval(w))
    }

    pub fn rho(&self, w: f64) -> f64 {
        0.5 * (w - self.eval(w))
    }

    fn probe_limit(&self) -> f64 {
        let wl = self.width_limit();
        if wl.is_finite() {
            wl
        } else {
            40.0 * self.scale
        }
    }

    /// Checks `a(0) = 0`, the limit at the right end, and strict Lip(1) on
    /// dyadic grids up to depth 12.
    pub fn check(&self) -> Result<()> {
        let tol = 1e-12 * self.scale;
        if self.eval(0.0).abs() > tol {
            return Err(ModelingError::BadPattern(format!("a(0) = 0 (got {})", self.eval(0.0))));
        }
        let wl = self.width_limit();
        if wl.is_finite() {
            let end = self.eval(wl * (1.0 - 1e-12));
            let want = self.a_plus + self.a_minus;
            if (end - want).abs() > 1e-6 * self.scale {
                return Err(ModelingError::BadPattern(format!("a(w) -> {want} at the right end (got {end})")));
            }
        }
        let top = self.probe_limit();
        let depth = 12;
        let n = 1usize << depth;
        // The finest grid contains every coarser one; coarse chords are
        // averages of fine ones, so only the finest level needs checking.
        let step = top / n as f64;
        let mut prev = (0.0, self.eval(0.0));
        for k in 1..=n {
            let w = if k == n && wl.is_finite() { top * (1.0 - 1e-9) } else { step * k as f64 };
            let a = self.eval(w);
            let slope = (a - prev.1).abs() / (w - prev.0);
            if !(slope < 1.0 - 1e-10) {
                return Err(ModelingError::Lip1Violated { w1: prev.0, w2: w, slope });
            }
            prev = (w, a);
        }
        Ok(())
    }
}

/// `r(x) = -rho(xi^{-1}(x))` for `x >= 0` and `xi(rho^{-1}(-x))` for `x <= 0`.
pub fn from_asymmetry_pattern(pattern: AsymmetryPattern) -> Result<ReciprocatingCurve> {
    from_asymmetry_pattern_with(pattern, true)
}

/// As [`from_asymmetry_pattern`]; `require_lip1 = false` admits arbitrary
/// increasing `xi`, `rho`.
pub fn from_asymmetry_pattern_with(pattern: AsymmetryPattern, require_lip1: bool) -> Result<ReciprocatingCurve> {
    if require_lip1 {
        pattern.check()?;
    }
    let wl = pattern.width_limit();
    let scale = pattern.scale;
    let (a_minus, a_plus) = (pattern.a_minus, pattern.a_plus);
    let p = pattern.clone();
    let f = move |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        if x > 0.0 {
            match increasing_inverse(|w| p.xi(w), x, wl, scale) {
                Ok(w) if w < wl => -p.rho(w),
                _ => a_minus,
            }
        } else {
            match increasing_inverse(|w| p.rho(w), -x, wl, scale) {
                Ok(w) if w < wl => p.xi(w),
                _ => a_plus,
            }
        }
    };
    Ok(ReciprocatingCurve::family(a_minus, a_plus, scale, "pattern".into(), f))
}

/// The pattern of a curve: `a(w) = x + r(x)` where `x - r(x) = w`, `x >= 0`.
pub fn asymmetry_pattern_of(curve: &ReciprocatingCurve) -> Result<AsymmetryPattern> {
    if curve.eval(0.0).abs() > 1e-12 * curve.scale {
        return Err(ModelingError::NotValidCurve(format!("r(0) = {}", curve.eval(0.0))));
    }
    let c = Arc::new(curve.clone());
    let wl = curve.a_plus - curve.a_minus;
    let right = {
        let c = c.clone();
        move |w: f64| -> f64 {
            if w <= 0.0 {
                return 0.0;
            }
            let x = increasing_inverse(|x| x - c.eval(x), w, c.a_plus, c.scale).unwrap_or(c.a_plus);
            x + c.eval(x)
        }
    };
    let left = |w: f64| -> f64 {
        let s = increasing_inverse(|s| c.eval(-s) + s, w, -c.a_minus, c.scale).unwrap_or(-c.a_minus);
        c.eval(-s) - s
    };
    let top = if wl.is_finite() { wl } else { 40.0 * curve.scale };
    for k in 1..16 {
        let w = top * k as f64 / 16.0;
        let (a1, a2) = (right(w), left(w));
        if !((a1 - a2).abs() <= 1e-9 * (1.0 + w)) {
            return Err(ModelingError::NotValidCurve(format!("two-sided pattern mismatch at w = {w}: {a1} vs {a2}")));
        }
    }
    AsymmetryPattern::new(Arc::new(right), curve.a_minus, curve.a_plus, curve.scale)
}

/// Outcome of [`validate_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub r_zero: f64,
    pub strictly_decreasing: bool,
    pub continuous: bool,
    pub boundary_constant: bool,
    pub involution_max_err: f64,
    pub involution_ok: bool,
    pub derivative_at_zero: Option<f64>,
    pub derivative_ok: Option<bool>,
    pub violations: Vec<String>,
}

impl CurveReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Locates a jump inside `[a, b]` by halving; returns its size at the end.
fn residual_jump(curve: &ReciprocatingCurve, mut a: f64, mut b: f64) -> f64 {
    let (mut ra, mut rb) = (curve.eval(a), curve.eval(b));
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let rm = curve.eval(mid);
        if (rm - ra).abs() >= (rb - rm).abs() {
            b = mid;
            rb = rm;
        } else {
            a = mid;
            ra = rm;
        }
    }
    (rb - ra).abs()
}

/// Checks the characteristic properties of a continuous reciprocating
/// function on `grid_size` probe points; `check_derivative` adds `r'(0) = -1`.
pub fn validate_curve(curve: &ReciprocatingCurve, grid_size: usize, tol: f64, check_derivative: bool) -> CurveReport {
    let mut violations = Vec::new();
    let r_zero = curve.eval(0.0);
    if r_zero.abs() > tol {
        violations.push(format!("r(0) = {r_zero}"));
    }
    let grid = curve.probe_grid(grid_size.max(3));
    let vals: Vec<f64> = grid.iter().map(|&x| curve.eval(x)).collect();

    let mut strictly_decreasing = true;
    for k in 1..grid.len() {
        if !(vals[k] < vals[k - 1]) {
            strictly_decreasing = false;
            violations.push(format!("not strictly decreasing at x = {}", grid[k]));
            break;
        }
    }

    let mut continuous = true;
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for k in 0..diffs.len() {
        let near = [k.checked_sub(1), Some(k + 1)]
            .into_iter()
            .flatten()
            .filter_map(|j| diffs.get(j))
            .fold(0.0f64, |a, b| a.max(*b));
        if diffs[k].is_finite() && diffs[k] <= 3.0 * near + tol {
            continue;
        }
        let jump = residual_jump(curve, grid[k], grid[k + 1]);
        if !(jump <= 1e-6 * (1.0 + vals[k].abs().min(vals[k + 1].abs()))) {
            continuous = false;
            violations.push(format!("jump of {jump} in [{}, {}]", grid[k], grid[k + 1]));
        }
    }

    let mut boundary_constant = true;
    let outside = |a: f64| if a.is_finite() { vec![a, a + a.signum() * curve.scale, 2.0 * a] } else { vec![a] };
    for (side, want, xs) in [("left", curve.a_plus, outside(curve.a_minus)), ("right", curve.a_minus, outside(curve.a_plus))] {
        for x in xs {
            let r = curve.eval(x);
            let ok = if want.is_infinite() { r == want } else { (r - want).abs() <= tol * (1.0 + want.abs()) };
            if !ok {
                boundary_constant = false;
                violations.push(format!("{side} boundary: r({x}) = {r}, expected {want}"));
            }
        }
    }

    let involution_max_err = grid
        .iter()
        .zip(&vals)
        .map(|(&x, &r)| (curve.eval(r) - x).abs() / (1.0 + x.abs()))
        .fold(0.0, f64::max);
    let involution_ok = involution_max_err <= tol;
    if !involution_ok {
        violations.push(format!("r(r(x)) differs from x by {involution_max_err:e}"));
    }

    let (derivative_at_zero, derivative_ok) = if check_derivative {
        let d = curve.derivative_at_zero();
        let ok = (d + 1.0).abs() <= 1e-4;
        if !ok {
            violations.push(format!("r'(0) = {d}"));
        }
        (Some(d), Some(ok))
    } else {
        (None, None)
    };

    CurveReport {
        r_zero,
        strictly_decreasing,
        continuous,
        boundary_constant,
        involution_max_err,
        involution_ok,
        derivative_at_zero,
        derivative_ok,
        violations,
    }
}

/// Outcome of [`validate_x_pm`] and [`validate_x_pm_steps`].
#[derive(Debug, Clone)]
pub struct XpmValidation {
    pub integral_plus: f64,
    pub integral_minus: f64,
    /// `P(X = 0) = 1 - integral_plus - integral_minus`.
    pub p_zero: f64,
    pub measure: ZeroMeanMeasure,
}

/// Checks that `y_+`, `y_-` on `[0, m]` are the inverses `x_+`, `x_-` of some
/// zero-mean law and reconstructs it. Values at `h = 0` are taken as 0.
pub fn validate_x_pm(y_plus: RealFn, y_minus: RealFn, m: f64, grid_size: usize) -> Result<XpmValidation> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(ModelingError::CharacterizationFailed(vec![format!("m = {m} must be positive and finite")]));
    }
    let yp: RealFn = Arc::new(move |h| if h <= 0.0 { 0.0 } else { y_plus(h) });
    let ym: RealFn = Arc::new(move |h| if h <= 0.0 { 0.0 } else { y_minus(h) });
    let mut bad = Vec::new();
    let n = grid_size.max(10);
    let eps = 1e-9 * m;
    for (name, y, sign) in [("y_plus", &yp, 1.0), ("y_minus", &ym, -1.0)] {
        let mut prev = 0.0;
        for k in 1..=n {
            let h = m * k as f64 / n as f64;
            let v = sign * y(h);
            if v.is_nan() || (k < n && !v.is_finite()) {
                bad.push(format!("{name} is not finite at h = {h}"));
                break;
            }
            if !(v > 0.0) {
                bad.push(format!("{name} is not {} at h = {h}", if sign > 0.0 { "positive" } else { "negative" }));
                break;
            }
            if v < prev {
                bad.push(format!("{name} is not monotone at h = {h}"));
                break;
            }
            // A jump that sits to the left of a grid point breaks left-continuity.
            let left = sign * y(h - eps);
            let right = if k < n { sign * y(h + eps) } else { v };
            let jl = (v - left).abs();
            if v.is_finite() && jl > 1e-6 * (1.0 + v.abs()) && (right - v).abs() < jl {
                bad.push(format!("{name} is not left-continuous at h = {h}"));
                break;
            }
            prev = v;
        }
    }
    if !bad.is_empty() {
        return Err(ModelingError::CharacterizationFailed(bad));
    }
    let integral_plus = integrate(|h| 1.0 / yp(h), 0.0, m, 1e-13);
    let integral_minus = integrate(|h| -1.0 / ym(h), 0.0, m, 1e-13);
    let total = integral_plus + integral_minus;
    if !(total <= 1.0 + 1e-9) {
        return Err(ModelingError::CharacterizationFailed(vec![format!(
            "integral of 1/y_+ plus 1/(-y_-) is {total}, exceeds 1"
        )]));
    }
    let law = GCurveLaw::new(yp, ym, m);
    let measure = ZeroMeanMeasure::from_analytic(Arc::new(law))?;
    Ok(XpmValidation { integral_plus, integral_minus, p_zero: (1.0 - total).max(0.0), measure })
}

/// Step-function form of `x_+` or `x_-`: `(h_k, v_k)` means `y = v_k` on
/// `(h_{k-1}, h_k]`, with `h_0 = 0`.
pub type StepTable = Vec<(Rational, Rational)>;

/// The inverses of a discrete measure as step tables.
pub fn x_pm_steps(measure: &ZeroMeanMeasure) -> Option<(StepTable, StepTable)> {
    let t = measure.exact()?;
    let plus = t.pos.iter().zip(&t.g_pos).map(|(&i, g)| (g.clone(), t.locs[i].clone())).collect();
    let minus = t.neg.iter().zip(&t.g_neg).map(|(&i, g)| (g.clone(), t.locs[i].clone())).collect();
    Some((plus, minus))
}

/// Exact variant of [`validate_x_pm`] for step-function inverses: the
/// reconstructed law is discrete, with mass `(h_k - h_{k-1}) / |v_k|` at `v_k`.
pub fn validate_x_pm_steps(plus: &[(Rational, Rational)], minus: &[(Rational, Rational)]) -> Result<XpmValidation> {
    let mut bad = Vec::new();
    let mut atoms: Vec<(Rational, Rational)> = Vec::new();
    let mut ends = Vec::new();
    for (name, steps, positive) in [("y_plus", plus, true), ("y_minus", minus, false)] {
        if steps.is_empty() {
            bad.push(format!("{name} is empty"));
            continue;
        }
        let mut h_prev = Rational::zero();
        let mut v_prev = Rational::zero();
        for (h, v) in steps {
            let mag = if positive { v.clone() } else { -v.clone() };
            if *h <= h_prev {
                bad.push(format!("{name}: levels must increase, got {h} after {h_prev}"));
                break;
            }
            if mag <= Rational::zero() {
                bad.push(format!("{name}: value {v} has the wrong sign"));
                break;
            }
            if mag < v_prev {
                bad.push(format!("{name} is not monotone at h = {h}"));
                break;
            }
            let mass = (h.clone() - h_prev.clone()) / mag.clone();
            match atoms.last_mut() {
                Some(last) if last.0 == *v => last.1 += mass,
                _ => atoms.push((v.clone(), mass)),
            }
            h_prev = h.clone();
            v_prev = mag;
        }
        ends.push(h_prev);
    }
    if ends.len() == 2 && ends[0] != ends[1] {
        bad.push(format!("the two tables end at different levels {} and {}", ends[0], ends[1]));
    }
    if !bad.is_empty() {
        return Err(ModelingError::CharacterizationFailed(bad));
    }
    let side = |positive: bool| {
        atoms
            .iter()
            .filter(|(x, _)| (*x > Rational::zero()) == positive)
            .fold(Rational::zero(), |acc, (_, p)| acc + p.clone())
    };
    let (ip, im) = (side(true), side(false));
    let p_zero = Rational::one() - ip.clone() - im.clone();
    if p_zero < Rational::zero() {
        return Err(ModelingError::CharacterizationFailed(vec![format!(
            "integral of 1/y_+ plus 1/(-y_-) is {}, exceeds 1",
            ip.clone() + im.clone()
        )]));
    }
    if !p_zero.is_zero() {
        atoms.push((Rational::zero(), p_zero.clone()));
    }
    let measure = ZeroMeanMeasure::from_rational_atoms(atoms, false)?;
    Ok(XpmValidation { integral_plus: ip.to_f64(), integral_minus: im.to_f64(), p_zero: p_zero.to_f64(), measure })
}

/// Power-family shape as written in JSON: a number or `"inf"` / `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeParam {
    Num(f64),
    Tag(String),
}

/// JSON description of a family member, e.g. `{"family": "power", "p": 2, "c": 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Power { p: ShapeParam, c: f64 },
    PowerKink { kappa: f64 },
    Hyperbolic { alpha: f64, c: f64 },
    CubicRate { alpha: f64, c: f64 },
}

impl FamilySpec {
    pub fn build(&self) -> Result<ReciprocatingCurve> {
        match self {
            FamilySpec::Power { p, c } => {
                let shape = match p {
                    ShapeParam::Num(v) => PowerShape::P(*v),
                    ShapeParam::Tag(s) => match s.as_str() {
                        "inf" | "+inf" => PowerShape::PlusInfinity,
                        "-inf" => PowerShape::MinusInfinity,
                        other => return Err(ModelingError::BadSpec(format!("power shape {other:?}"))),
                    },
                };
                power_family(shape, *c)
            }
            FamilySpec::PowerKink { kappa } => power_family(PowerShape::Kink, *kappa),
            FamilySpec::Hyperbolic { alpha, c } => hyperbolic_family(*alpha, *c),
            FamilySpec::CubicRate { alpha, c } => cubic_rate_family(*alpha, *c),
        }
    }
}
