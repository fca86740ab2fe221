//! Root finding, quadrature and special functions.

/// Gauss-Kronrod 7/15 nodes on [0, 1] (positive half; the rule is symmetric).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over the finite interval `[a, b]`.
///
/// Nodes are interior, so integrable endpoint singularities are tolerated.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let mut comp = 0.0;
    let width = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi);
        let local_tol = tol * ((hi - lo).abs() / width).max(1e-3);
        if err <= local_tol || depth >= 48 || (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs()) {
            // Kahan summation keeps many tiny panels accurate.
            let y = val - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectFailed;

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, for a predicate that is
/// false then true. Expands `hi` geometrically (up to `limit`) when needed.
///
/// Returns `Ok(None)` if `pred` is false everywhere up to `limit`.
pub fn first_true(
    mut pred: impl FnMut(f64) -> bool,
    lo: f64,
    hi: f64,
    limit: f64,
) -> Result<Option<f64>, BisectFailed> {
    let mut lo = lo;
    let mut hi = hi.min(limit);
    if pred(lo) {
        return Ok(Some(lo));
    }
    let mut step = (hi - lo).max(1.0);
    while !pred(hi) {
        if hi >= limit {
            return Ok(None);
        }
        lo = hi;
        hi = if limit.is_finite() {
            (hi + step).min(limit)
        } else {
            hi + step
        };
        step *= 2.0;
        if !hi.is_finite() {
            return Ok(None);
        }
    }
    for _ in 0..400 {
        let tol = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if hi - lo <= tol {
            return Ok(Some(hi));
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Ok(Some(hi));
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(BisectFailed)
}

/// Inverse of a continuous increasing `f` on `[0, sup)`, with `f(0) = 0`.
///
/// Returns `sup` when `target` is not reached below it.
pub fn increasing_inverse(
    f: impl Fn(f64) -> f64,
    target: f64,
    sup: f64,
    scale: f64,
) -> Result<f64, BisectFailed> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let start = if sup.is_finite() { sup.min(scale) } else { scale };
    let mut lo = 0.0;
    let mut hi = start;
    let mut iters = 0;
    while f(hi) < target {
        if sup.is_finite() && hi >= sup {
            return Ok(sup);
        }
        lo = hi;
        hi = if sup.is_finite() {
            (2.0 * hi).min(sup)
        } else {
            2.0 * hi
        };
        iters += 1;
        if iters > 2100 || !hi.is_finite() {
            return Ok(f64::INFINITY);
        }
    }
    // Illinois false position with a bisection step every fourth iteration,
    // so the bracket at least halves every four evaluations.
    let (mut flo, mut fhi) = (f(lo) - target, f(hi) - target);
    let mut last_side = 0i8;
    for it in 0..400 {
        let width = hi - lo;
        if width <= 1e-15 * hi.max(1e-300) {
            break;
        }
        let secant = lo + width * (-flo / (fhi - flo));
        let mid = if it % 4 == 3 || !(secant > lo && secant < hi) { lo + 0.5 * width } else { secant };
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid) - target;
        if fm == 0.0 {
            hi = mid;
            fhi = 0.0;
            break;
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
            if last_side == -1 {
                fhi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if last_side == 1 {
                flo *= 0.5;
            }
            last_side = 1;
        }
    }
    let _ = fhi;
    // Pick the endpoint whose image is closer.
    let (fl, fh) = (f(lo), f(hi));
    if !fl.is_finite() || !fh.is_finite() {
        return Ok(hi);
    }
    if fh - fl > 0.0 {
        let t = ((target - fl) / (fh - fl)).clamp(0.0, 1.0);
        Ok(lo + t * (hi - lo))
    } else {
        Ok(hi)
    }
}

/// Standard normal upper tail `P(Z >= x)`.
pub fn normal_tail(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E max(0, Z - t)^k` for standard normal `Z`.
pub fn normal_partial_moment(k: u32, t: f64) -> f64 {
    let mut prev2 = normal_tail(t);
    if k == 0 {
        return prev2;
    }
    let mut prev1 = normal_pdf(t) - t * prev2;
    for j in 2..=k {
        let next = (j - 1) as f64 * prev2 - t * prev1;
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Kolmogorov-Smirnov distance of a sample from the uniform law on [0, 1].
pub fn ks_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - v).max(v - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Weighted KS distance from uniform; weights need not be normalized.
pub fn ks_uniform_weighted(pairs: &mut [(f64, f64)]) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cum = 0.0;
    let mut d: f64 = 0.0;
    for &(v, w) in pairs.iter() {
        let v = v.clamp(0.0, 1.0);
        d = d.max((v - cum / total).abs());
        cum += w;
        d = d.max((cum / total - v).abs());
    }
    d
}

/// 99% Kolmogorov-Smirnov critical value for sample size `n`.
pub fn ks_critical_99(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}
