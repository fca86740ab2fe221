use std::fmt;
use std::sync::Arc;

use crate::numerics::{first_true, integrate};

/// A zero-mean law described by its G curve and distribution function.
///
/// Implementors supply `g`, `cdf` and `m`; inverses default to bisection.
pub trait AnalyticLaw: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// `m = G(+-inf)`.
    fn m(&self) -> f64;

    /// Closed support `[lo, hi]` (endpoints may be infinite).
    fn support(&self) -> (f64, f64);

    /// Typical length scale, used to seed bracket expansion.
    fn scale(&self) -> f64 {
        1.0
    }

    fn g(&self, x: f64) -> f64;

    /// `G(x-)` for `x > 0`, `G(x+)` for `x < 0`.
    fn g_inner(&self, x: f64) -> f64 {
        self.g(x)
    }

    fn cdf(&self, x: f64) -> f64;

    /// `P(X < x)`.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    /// Atoms known in closed form, as `(location, mass)`.
    fn atoms(&self) -> Vec<(f64, f64)> {
        Vec::new()
    }

    fn x_plus(&self, h: f64) -> f64 {
        side_inverse(self, h, 1.0)
    }

    fn x_minus(&self, h: f64) -> f64 {
        side_inverse(self, h, -1.0)
    }

    /// `inf{x : F(x) >= t}` for `t` in `(0, 1)`.
    fn quantile(&self, t: f64) -> f64 {
        let (lo_s, hi_s) = self.support();
        let scale = self.scale();
        let mut lo = if lo_s.is_finite() { lo_s } else { -scale };
        while self.cdf(lo) >= t && !lo_s.is_finite() {
            lo = 2.0 * lo - scale;
            if !lo.is_finite() {
                return lo_s;
            }
        }
        if lo_s.is_finite() && self.cdf(lo_s) >= t {
            return lo_s;
        }
        let span = if hi_s.is_finite() { hi_s - lo } else { f64::INFINITY };
        let q = first_true(|x| self.cdf(lo + x) >= t, 0.0, scale.min(span), span)
            .ok()
            .flatten()
            .map(|d| lo + d)
            .unwrap_or(hi_s);
        snap(q, &self.atoms())
    }
}

fn snap(x: f64, atoms: &[(f64, f64)]) -> f64 {
    atoms
        .iter()
        .map(|a| a.0)
        .find(|a| (a - x).abs() <= 1e-9 * (1.0 + a.abs()))
        .unwrap_or(x)
}

/// Generalized inverse of G on one half-line (`sign = 1` or `-1`).
fn side_inverse<L: AnalyticLaw + ?Sized>(law: &L, h: f64, sign: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let (lo_s, hi_s) = law.support();
    let reach = if sign > 0.0 { hi_s.max(0.0) } else { (-lo_s).max(0.0) };
    let m = law.m();
    if h >= m && !reach.is_finite() {
        return sign * f64::INFINITY;
    }
    if h > m {
        return sign * f64::INFINITY;
    }
    let s = first_true(|s| law.g(sign * s) >= h, 0.0, law.scale().min(reach), reach)
        .ok()
        .flatten();
    match s {
        Some(s) => snap(sign * s, &law.atoms()),
        None => sign * f64::INFINITY,
    }
}

/// Uniform law on `[-a, a]`.
#[derive(Debug, Clone, Copy)]
pub struct Uniform {
    pub half_width: f64,
}

impl AnalyticLaw for Uniform {
    fn name(&self) -> String {
        format!("uniform(-{a}, {a})", a = self.half_width)
    }
    fn m(&self) -> f64 {
        self.half_width / 4.0
    }
    fn support(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }
    fn scale(&self) -> f64 {
        self.half_width
    }
    fn g(&self, x: f64) -> f64 {
        let a = self.half_width;
        let y = x.abs().min(a);
        y * y / (4.0 * a)
    }
    fn cdf(&self, x: f64) -> f64 {
        let a = self.half_width;
        ((x + a) / (2.0 * a)).clamp(0.0, 1.0)
    }
    fn x_plus(&self, h: f64) -> f64 {
        let a = self.half_width;
        if h <= 0.0 {
            0.0
        } else if h > self.m() {
            f64::INFINITY
        } else {
            (4.0 * a * h).sqrt().min(a)
        }
    }
    fn x_minus(&self, h: f64) -> f64 {
        -self.x_plus(h)
    }
    fn quantile(&self, t: f64) -> f64 {
        self.half_width * (2.0 * t - 1.0)
    }
}

/// Density `e^{x-1}` on `(-inf, 1)`: the law of `1 - E` with `E ~ Exp(1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShiftedExponential;

impl AnalyticLaw for ShiftedExponential {
    fn name(&self) -> String {
        "shifted_exponential".into()
    }
    fn m(&self) -> f64 {
        (-1.0f64).exp()
    }
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, 1.0)
    }
    fn g(&self, x: f64) -> f64 {
        if x >= 1.0 || x == f64::NEG_INFINITY {
            return self.m();
        }
        // The same antiderivative serves both half-lines.
        self.m() + (x - 1.0) * (x - 1.0).exp()
    }
    fn cdf(&self, x: f64) -> f64 {
        if x >= 1.0 {
            1.0
        } else {
            (x - 1.0).exp()
        }
    }
    fn quantile(&self, t: f64) -> f64 {
        1.0 + t.ln()
    }
}

/// The law reconstructed from a pair of candidate inverses `y_+`, `y_-`.
///
/// Its G curve is `L(x) = sup{h : y_+(h) <= x}` (mirrored for `x < 0`), so
/// `x_+ = y_+` and `x_- = y_-` by construction.
#[derive(Clone)]
pub struct GCurveLaw {
    pub(crate) y_plus: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub(crate) y_minus: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub(crate) m: f64,
    pub(crate) scale: f64,
    pub(crate) atoms: Vec<(f64, f64)>,
}

impl fmt::Debug for GCurveLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GCurveLaw").field("m", &self.m).field("atoms", &self.atoms).finish()
    }
}

const QUAD_TOL: f64 = 1e-13;

impl GCurveLaw {
    pub fn new(
        y_plus: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        y_minus: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        m: f64,
    ) -> Self {
        let mid = 0.5 * m;
        let scale = 0.5 * (y_plus(mid).abs() + y_minus(mid).abs());
        let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        let mut law = GCurveLaw { y_plus, y_minus, m, scale, atoms: Vec::new() };
        law.atoms = law.detect_atoms();
        law
    }

    /// `sup{h in [0, m] : y(h) <= s}` or, with `strict`, `y(h) < s`, for a
    /// nondecreasing magnitude curve `y`.
    fn level_of(&self, y: &dyn Fn(f64) -> f64, s: f64, strict: bool) -> f64 {
        let ok = |h: f64| {
            let v = y(h).abs();
            if strict {
                v < s
            } else {
                v <= s
            }
        };
        if ok(self.m) {
            return self.m;
        }
        if !ok(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, self.m);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn curve(&self, x: f64) -> &(dyn Fn(f64) -> f64 + Send + Sync) {
        if x >= 0.0 {
            &*self.y_plus
        } else {
            &*self.y_minus
        }
    }

    /// `P(|X| >= s)` restricted to the half-line of `sign`, or `P(|X| > s)` if `strict`.
    fn tail(&self, sign: f64, s: f64, strict: bool) -> f64 {
        let y = self.curve(sign);
        let integral = integrate(|h| 1.0 / s.max(y(h).abs()), 0.0, self.m, QUAD_TOL);
        let l = self.level_of(y, s, !strict);
        (integral - l / s).max(0.0)
    }

    /// `P(X > 0)` (resp. `P(X < 0)` for negative sign).
    fn side_mass(&self, sign: f64) -> f64 {
        let y = self.curve(sign);
        integrate(|h| 1.0 / y(h).abs(), 0.0, self.m, QUAD_TOL)
    }

    fn detect_atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms = Vec::new();
        let n = 512;
        for (sign, y) in [(1.0, &self.y_plus), (-1.0, &self.y_minus)] {
            let mut last = f64::NAN;
            for k in 1..=n {
                let h = self.m * k as f64 / n as f64;
                let v = y(h);
                if !v.is_finite() || v == last {
                    continue;
                }
                // A flat stretch of y is a jump of L, i.e. an atom.
                let s = v.abs();
                let jump = self.level_of(&**y, s, false) - self.level_of(&**y, s, true);
                if jump > 1e-12 * self.m {
                    atoms.push((sign * s, jump / s));
                }
                last = v;
            }
        }
        let p0 = 1.0 - self.side_mass(1.0) - self.side_mass(-1.0);
        if p0 > 1e-12 {
            atoms.push((0.0, p0));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms.dedup_by(|a, b| a.0 == b.0);
        atoms
    }
}

impl AnalyticLaw for GCurveLaw {
    fn name(&self) -> String {
        "reconstructed".into()
    }
    fn m(&self) -> f64 {
        self.m
    }
    fn support(&self) -> (f64, f64) {
        ((self.y_minus)(self.m), (self.y_plus)(self.m))
    }
    fn scale(&self) -> f64 {
        self.scale
    }
    fn g(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        self.level_of(self.curve(x), x.abs(), false)
    }
    fn g_inner(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        self.level_of(self.curve(x), x.abs(), true)
    }
    fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x > 0.0 {
            1.0 - self.tail(1.0, x, true)
        } else if x < 0.0 {
            self.tail(-1.0, -x, false)
        } else {
            1.0 - self.side_mass(1.0)
        }
    }
    fn cdf_left(&self, x: f64) -> f64 {
        if x > 0.0 {
            1.0 - self.tail(1.0, x, false)
        } else if x < 0.0 {
            self.tail(-1.0, -x, true)
        } else {
            self.side_mass(-1.0)
        }
    }
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.atoms.clone()
    }
    fn x_plus(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else if h > self.m {
            f64::INFINITY
        } else {
            (self.y_plus)(h)
        }
    }
    fn x_minus(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else if h > self.m {
            f64::NEG_INFINITY
        } else {
            (self.y_minus)(h)
        }
    }
}
