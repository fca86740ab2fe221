//! Optimality diagnostics: superadditive transport costs, alternative
//! two-point disintegrations, the norm inequalities and brute-force checks of
//! comonotone extremality.
//!
//! Costs are functions `k(y1, y2)` of the pair `(y_+, -y_-)` of a two-point
//! component, so both arguments are nonnegative.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disintegration::{self, MixtureDecomposition, PairSample};
use crate::measure::{AtomTable, ZeroMeanMeasure};
use crate::numerics::integrate;
use crate::scalar::{rationalize, Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimalError {
    #[error("component {index} is not a two-point zero-mean law: {reason}")]
    NotADisintegration { index: usize, reason: String },
    #[error("cost is not superadditive: k({a},{c}) + k({b},{d}) < k({a},{d}) + k({b},{c}) by {deficit:e}")]
    NotSuperadditive { a: f64, b: f64, c: f64, d: f64, deficit: f64 },
    #[error("cost satisfies neither transport hypothesis")]
    NoTransportHypothesis,
    #[error("bad cost parameter: {0}")]
    BadCost(String),
    #[error("bad exponent p = {0}")]
    BadP(f64),
    #[error("unsupported marginals: {0}")]
    UnsupportedMarginals(String),
    #[error("operation needs a discrete measure")]
    NotDiscrete,
}

type Result<T> = std::result::Result<T, OptimalError>;

/// Which transport regime a cost falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Right-continuous and bounded below on `[0, inf)^2`.
    Trans1,
    /// Continuous and bounded above on `(0, inf)^2`.
    Trans2,
    Both,
    None,
}

impl Hypothesis {
    pub fn admissible(self) -> bool {
        self != Hypothesis::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    BuiltInAnalytic,
    GridVerified,
    Unverified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioSide {
    /// `(y_+ / |y_-|)^p`
    Plus,
    /// `(|y_-| / y_+)^p`
    Minus,
    Both,
}

/// Serializable description of a cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// `1{y1 >= a, y2 >= b}`
    IndicatorGe { a: f64, b: f64 },
    /// `-|y1 - y2|^p`, `p >= 1`
    NegAbsDiffPow { p: f64 },
    /// `(y1 + y2)^p`, `p >= 1` or `p <= 0`
    AbsSumPow { p: f64 },
    /// `-(y1/y2)^p`, `-(y2/y1)^p` or their sum, `p > 0`
    RatioPow { p: f64, side: RatioSide },
    /// Bilinear interpolation of a table on `xs x ys`, clamped outside.
    Grid { xs: Vec<f64>, ys: Vec<f64>, values: Vec<Vec<f64>> },
}

pub type CostFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A cost `k(y1, y2)` with its transport hypothesis and superadditivity
/// certificate.
#[derive(Clone)]
pub struct CostFunction {
    pub name: String,
    pub spec: Option<CostSpec>,
    f: CostFn,
    pub hypothesis: Hypothesis,
    pub certificate: Certificate,
    pub symmetric: bool,
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFunction")
            .field("name", &self.name)
            .field("hypothesis", &self.hypothesis)
            .field("certificate", &self.certificate)
            .finish()
    }
}

fn check_param(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(OptimalError::BadCost(what()))
    }
}

impl CostFunction {
    pub fn eval(&self, y1: f64, y2: f64) -> f64 {
        (self.f)(y1, y2)
    }

    pub fn indicator_ge(a: f64, b: f64) -> Result<Self> {
        Self::from_spec(&CostSpec::IndicatorGe { a, b })
    }

    pub fn neg_abs_diff_pow(p: f64) -> Result<Self> {
        Self::from_spec(&CostSpec::NegAbsDiffPow { p })
    }

    pub fn abs_sum_pow(p: f64) -> Result<Self> {
        Self::from_spec(&CostSpec::AbsSumPow { p })
    }

    pub fn ratio_pow(p: f64, side: RatioSide) -> Result<Self> {
        Self::from_spec(&CostSpec::RatioPow { p, side })
    }

    /// A user cost. Its superadditivity is checked on `grid x grid` and the
    /// certificate is `GridVerified` on success.
    pub fn custom(
        name: &str,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        hypothesis: Hypothesis,
        symmetric: bool,
        grid: &[f64],
    ) -> Result<Self> {
        let mut k = CostFunction {
            name: name.to_string(),
            spec: None,
            f: Arc::new(f),
            hypothesis,
            certificate: Certificate::Unverified,
            symmetric,
        };
        check_superadditive(&k, grid, grid, 1e-12)?;
        k.certificate = Certificate::GridVerified;
        Ok(k)
    }

    pub fn from_spec(spec: &CostSpec) -> Result<Self> {
        let built = |name: String, f: CostFn, hypothesis, symmetric| CostFunction {
            name,
            spec: Some(spec.clone()),
            f,
            hypothesis,
            certificate: Certificate::BuiltInAnalytic,
            symmetric,
        };
        match *spec {
            CostSpec::IndicatorGe { a, b } => {
                check_param(a.is_finite() && b.is_finite(), || format!("indicator thresholds {a}, {b}"))?;
                let f: CostFn = Arc::new(move |y1, y2| if y1 >= a && y2 >= b { 1.0 } else { 0.0 });
                Ok(built(format!("indicator_ge({a},{b})"), f, Hypothesis::Trans1, a == b))
            }
            CostSpec::NegAbsDiffPow { p } => {
                check_param(p.is_finite() && p >= 1.0, || format!("neg_abs_diff_pow needs p >= 1, got {p}"))?;
                let f: CostFn = Arc::new(move |y1: f64, y2: f64| -(y1 - y2).abs().powf(p));
                Ok(built(format!("neg_abs_diff_pow({p})"), f, Hypothesis::Trans2, true))
            }
            CostSpec::AbsSumPow { p } => {
                check_param(p.is_finite() && (p >= 1.0 || p <= 0.0), || {
                    format!("abs_sum_pow needs p >= 1 or p <= 0, got {p}")
                })?;
                let f: CostFn = Arc::new(move |y1: f64, y2: f64| (y1 + y2).abs().powf(p));
                Ok(built(format!("abs_sum_pow({p})"), f, Hypothesis::Trans1, true))
            }
            CostSpec::RatioPow { p, side } => {
                check_param(p.is_finite() && p > 0.0, || format!("ratio_pow needs p > 0, got {p}"))?;
                let f: CostFn = match side {
                    RatioSide::Plus => Arc::new(move |y1: f64, y2: f64| -(y1 / y2).powf(p)),
                    RatioSide::Minus => Arc::new(move |y1: f64, y2: f64| -(y2 / y1).powf(p)),
                    RatioSide::Both => Arc::new(move |y1: f64, y2: f64| -(y1 / y2).powf(p) - (y2 / y1).powf(p)),
                };
                let tag = match side {
                    RatioSide::Plus => "plus",
                    RatioSide::Minus => "minus",
                    RatioSide::Both => "both",
                };
                Ok(built(format!("ratio_pow({p},{tag})"), f, Hypothesis::Trans2, side == RatioSide::Both))
            }
            CostSpec::Grid { ref xs, ref ys, ref values } => {
                let sorted = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
                check_param(sorted(xs) && sorted(ys), || "grid axes must be finite, increasing, length >= 2".into())?;
                check_param(
                    values.len() == xs.len() && values.iter().all(|row| row.len() == ys.len()),
                    || format!("grid values must be {} x {}", xs.len(), ys.len()),
                )?;
                check_param(values.iter().flatten().all(|v| v.is_finite()), || "grid values must be finite".into())?;
                for i in 0..xs.len() - 1 {
                    for j in 0..ys.len() - 1 {
                        let inc = values[i][j] + values[i + 1][j + 1] - values[i][j + 1] - values[i + 1][j];
                        if inc < -1e-12 * (1.0 + values[i][j].abs()) {
                            return Err(OptimalError::NotSuperadditive {
                                a: xs[i],
                                b: xs[i + 1],
                                c: ys[j],
                                d: ys[j + 1],
                                deficit: -inc,
                            });
                        }
                    }
                }
                let (xs, ys, values) = (xs.clone(), ys.clone(), values.clone());
                let symmetric = xs == ys && (0..xs.len()).all(|i| (0..i).all(|j| values[i][j] == values[j][i]));
                let f: CostFn = Arc::new(move |y1, y2| bilinear(&xs, &ys, &values, y1, y2));
                let mut k = built("grid".into(), f, Hypothesis::Both, symmetric);
                k.certificate = Certificate::GridVerified;
                Ok(k)
            }
        }
    }
}

fn locate(axis: &[f64], v: f64) -> (usize, f64) {
    let v = v.clamp(axis[0], axis[axis.len() - 1]);
    let i = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
    (i, (v - axis[i]) / (axis[i + 1] - axis[i]))
}

fn bilinear(xs: &[f64], ys: &[f64], values: &[Vec<f64>], x: f64, y: f64) -> f64 {
    let (i, s) = locate(xs, x);
    let (j, t) = locate(ys, y);
    let v = |a: usize, b: usize| values[a][b];
    (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1)) + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1))
}

/// Checks `k(a,c) + k(b,d) >= k(a,d) + k(b,c)` on every rectangle of the grid.
///
/// Adjacent cells suffice: larger rectangles are sums of them.
pub fn check_superadditive(k: &CostFunction, xs: &[f64], ys: &[f64], tol: f64) -> Result<()> {
    let sort = |v: &[f64]| {
        let mut v: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (xs, ys) = (sort(xs), sort(ys));
    for (a, b) in xs.iter().tuple_windows() {
        for (c, d) in ys.iter().tuple_windows() {
            let lhs = k.eval(*a, *c) + k.eval(*b, *d);
            let rhs = k.eval(*a, *d) + k.eval(*b, *c);
            if !(lhs.is_finite() && rhs.is_finite()) {
                continue;
            }
            if lhs < rhs - tol * (1.0 + lhs.abs().max(rhs.abs())) {
                return Err(OptimalError::NotSuperadditive { a: *a, b: *b, c: *c, d: *d, deficit: rhs - lhs });
            }
        }
    }
    Ok(())
}

/// One component `nu_weight * X_{y_plus, y_minus}`. A component with
/// `y_plus = y_minus = 0` is the point mass at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltComponent<S = f64> {
    pub nu_weight: S,
    pub y_plus: S,
    pub y_minus: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeDisintegration<S = f64> {
    pub components: Vec<AltComponent<S>>,
}

impl<S: Scalar> AlternativeDisintegration<S> {
    pub fn new(components: Vec<(S, S, S)>) -> Self {
        AlternativeDisintegration {
            components: components
                .into_iter()
                .map(|(nu_weight, y_plus, y_minus)| AltComponent { nu_weight, y_plus, y_minus })
                .collect(),
        }
    }

    pub fn from_decomposition(d: &MixtureDecomposition<S>) -> Self {
        let components = d
            .components
            .iter()
            .map(|c| {
                let (lo, hi) = if c.law.a <= c.law.b { (&c.law.a, &c.law.b) } else { (&c.law.b, &c.law.a) };
                AltComponent { nu_weight: c.weight.clone(), y_plus: hi.clone(), y_minus: lo.clone() }
            })
            .collect();
        AlternativeDisintegration { components }
    }

    /// The disintegration whose `nu~` is the coupling `plan` of `(y_+, y_-)`
    /// values, plus an optional point mass at zero. Any coupling of the laws
    /// of `Y_+` and `Y_-` yields a valid alternative this way.
    pub fn from_coupling(m: &S, plan: &[(S, S, S)], zero_mass: Option<S>) -> Self {
        let mut components: Vec<AltComponent<S>> = plan
            .iter()
            .filter(|(_, _, w)| !w.is_zero())
            .map(|(a, b, w)| {
                let e_pos = a.clone() * (-b.clone()) / (a.clone() - b.clone());
                AltComponent { nu_weight: m.clone() * w.clone() / e_pos, y_plus: a.clone(), y_minus: b.clone() }
            })
            .collect();
        if let Some(z) = zero_mass.filter(|z| !z.is_zero()) {
            components.push(AltComponent { nu_weight: z, y_plus: S::zero(), y_minus: S::zero() });
        }
        AlternativeDisintegration { components }
    }

    pub fn to_f64(&self) -> AlternativeDisintegration<f64> {
        AlternativeDisintegration {
            components: self
                .components
                .iter()
                .map(|c| AltComponent {
                    nu_weight: c.nu_weight.to_f64(),
                    y_plus: c.y_plus.to_f64(),
                    y_minus: c.y_minus.to_f64(),
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(OptimalError::NotADisintegration { index: 0, reason: "no components".into() });
        }
        let zero = S::zero();
        for (index, c) in self.components.iter().enumerate() {
            let bad = |reason: String| Err(OptimalError::NotADisintegration { index, reason });
            if !c.nu_weight.to_f64().is_finite() || c.nu_weight <= zero {
                return bad(format!("weight {} is not positive", c.nu_weight));
            }
            let atom_at_zero = c.y_plus.is_zero() && c.y_minus.is_zero();
            if !atom_at_zero && !(c.y_plus > zero && c.y_minus < zero) {
                return bad(format!("needs y_plus > 0 > y_minus, got ({}, {})", c.y_plus, c.y_minus));
            }
            if !(c.y_plus.to_f64().is_finite() && c.y_minus.to_f64().is_finite()) {
                return bad("endpoints must be finite".into());
            }
        }
        Ok(())
    }

    /// `E X^+` of each component's two-point law.
    fn positive_means(&self) -> Vec<S> {
        self.components
            .iter()
            .map(|c| {
                if c.y_plus.is_zero() {
                    S::zero()
                } else {
                    // P(X = y_+) * y_+ = y_+ |y_-| / (y_+ - y_-)
                    c.y_plus.clone() * (-c.y_minus.clone()) / (c.y_plus.clone() - c.y_minus.clone())
                }
            })
            .collect()
    }

    /// Total mass of the mixture.
    pub fn total_weight(&self) -> S {
        self.components.iter().fold(S::zero(), |acc, c| acc + c.nu_weight.clone())
    }

    /// Law of the mixture as merged atoms in increasing order.
    pub fn reassemble(&self) -> Vec<(S, S)> {
        let mut atoms: Vec<(S, S)> = Vec::new();
        let mut push = |x: &S, mass: S| match atoms.iter_mut().find(|(y, _)| y == x) {
            Some(slot) => slot.1 = slot.1.clone() + mass,
            None => atoms.push((x.clone(), mass)),
        };
        for c in &self.components {
            if c.y_plus.is_zero() {
                push(&S::zero(), c.nu_weight.clone());
                continue;
            }
            let width = c.y_plus.clone() - c.y_minus.clone();
            push(&c.y_plus, c.nu_weight.clone() * (-c.y_minus.clone()) / width.clone());
            push(&c.y_minus, c.nu_weight.clone() * c.y_plus.clone() / width);
        }
        atoms.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap());
        atoms
    }
}

impl AlternativeDisintegration<f64> {
    /// Exact copy, reading each float as the simplest fraction rounding to it.
    pub fn rationalized(&self) -> Result<AlternativeDisintegration<Rational>> {
        let q = |index: usize, x: f64| {
            rationalize(x).ok_or(OptimalError::NotADisintegration { index, reason: format!("non-finite value {x}") })
        };
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| Ok(AltComponent { nu_weight: q(i, c.nu_weight)?, y_plus: q(i, c.y_plus)?, y_minus: q(i, c.y_minus)? }))
            .collect::<Result<_>>()?;
        Ok(AlternativeDisintegration { components })
    }
}

/// The canonical disintegration of a discrete measure as an alternative.
pub fn canonical_alternative(measure: &ZeroMeanMeasure) -> Result<AlternativeDisintegration<f64>> {
    let d = disintegration::decompose(measure).map_err(|_| OptimalError::NotDiscrete)?;
    Ok(AlternativeDisintegration::from_decomposition(&d))
}

/// `nu~(s) = nu(s) E X^+_{y_+(s), y_-(s)} / m`, one weight per component; the
/// point mass at zero gets weight 0. Fails unless the weighted positive means
/// add up to `m`.
pub fn tilted_weights<S: Scalar>(alt: &AlternativeDisintegration<S>, m: &S) -> Result<Vec<S>> {
    alt.validate()?;
    let raw: Vec<S> = alt
        .components
        .iter()
        .zip(alt.positive_means())
        .map(|(c, e)| c.nu_weight.clone() * e)
        .collect();
    let total = raw.iter().fold(S::zero(), |acc, w| acc + w.clone());
    if total <= S::zero() {
        return Err(OptimalError::NotADisintegration { index: 0, reason: "no mass off zero".into() });
    }
    let scale = if S::EXACT { S::zero() } else { m.clone() * S::from_int(1000) };
    if !total.eq_within(m, &scale) {
        return Err(OptimalError::NotADisintegration {
            index: 0,
            reason: format!("sum of nu * E X^+ is {total}, expected m = {m}"),
        });
    }
    Ok(raw.into_iter().map(|w| w / total.clone()).collect())
}

/// One mismatched atom in a law comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDiff {
    pub x: f64,
    pub alternative: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub matches: bool,
    pub exact: bool,
    pub y_plus: Vec<AtomDiff>,
    pub y_minus: Vec<AtomDiff>,
    /// Set when the alternative is not a valid list of two-point laws.
    pub error: Option<String>,
}

fn law_diff<S: Scalar>(alt: &[(S, S)], target: &[(S, S)], scale: &S) -> Vec<AtomDiff> {
    let mut points: Vec<S> = Vec::new();
    for (x, _) in alt.iter().chain(target) {
        if !points.iter().any(|p| p.eq_within(x, scale)) {
            points.push(x.clone());
        }
    }
    let mass_at = |law: &[(S, S)], x: &S| {
        law.iter().filter(|(y, _)| y.eq_within(x, scale)).fold(S::zero(), |acc, (_, p)| acc + p.clone())
    };
    let one = S::one();
    let mut out: Vec<AtomDiff> = points
        .iter()
        .filter_map(|x| {
            let a = mass_at(alt, x);
            let t = mass_at(target, x);
            (!a.eq_within(&t, &one)).then(|| AtomDiff { x: x.to_f64(), alternative: a.to_f64(), target: t.to_f64() })
        })
        .collect();
    out.sort_by(|l, r| l.x.total_cmp(&r.x));
    out
}

fn marginal_check_table<S: Scalar>(alt: &AlternativeDisintegration<S>, table: &AtomTable<S>) -> MarginalReport {
    let failed = |e: OptimalError| MarginalReport {
        matches: false,
        exact: S::EXACT,
        y_plus: vec![],
        y_minus: vec![],
        error: Some(e.to_string()),
    };
    let weights = match tilted_weights(alt, table.m()) {
        Ok(w) => w,
        Err(e) => return failed(e),
    };
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (c, w) in alt.components.iter().zip(weights) {
        if !w.is_zero() {
            plus.push((c.y_plus.clone(), w.clone()));
            minus.push((c.y_minus.clone(), w));
        }
    }
    let scale = table.m().clone();
    let y_plus = law_diff(&plus, &table.tilt(disintegration::Tilt::YPlus), &scale);
    let y_minus = law_diff(&minus, &table.tilt(disintegration::Tilt::YMinus), &scale);
    MarginalReport { matches: y_plus.is_empty() && y_minus.is_empty(), exact: S::EXACT, y_plus, y_minus, error: None }
}

/// [`marginal_check`] for an alternative given in rationals.
pub fn marginal_check_exact(
    alt: &AlternativeDisintegration<Rational>,
    measure: &ZeroMeanMeasure,
) -> Result<MarginalReport> {
    let exact = measure.exact().ok_or(OptimalError::NotDiscrete)?;
    Ok(marginal_check_table(alt, exact))
}

/// Whether, under `nu~`, `y_+` has the law of `Y_+` and `y_-` that of `Y_-`.
///
/// Exact when the measure carries rational atoms (floats in `alt` are read
/// as their simplest fractions); otherwise floating point with a relative
/// tolerance of 1e-12.
pub fn marginal_check(alt: &AlternativeDisintegration<f64>, measure: &ZeroMeanMeasure) -> Result<MarginalReport> {
    if let Some(exact) = measure.exact() {
        return Ok(match alt.rationalized() {
            Ok(q) => marginal_check_table(&q, exact),
            Err(e) => MarginalReport { matches: false, exact: true, y_plus: vec![], y_minus: vec![], error: Some(e.to_string()) },
        });
    }
    let table = measure.table().ok_or(OptimalError::NotDiscrete)?;
    Ok(marginal_check_table(alt, table))
}

/// `E g(X)` against the mixture, for one test function `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub g: String,
    pub mixture: f64,
    pub target: f64,
    pub holds: bool,
}

/// Checks `E g(X) = sum nu E g(X_{y+,y-})` for `g` in `x^+`, `x^-`, `x^2`,
/// the constant 1 and the indicator of each atom, in exact arithmetic when
/// possible.
pub fn mixture_identity(alt: &AlternativeDisintegration<f64>, measure: &ZeroMeanMeasure) -> Result<Vec<IdentityCheck>> {
    alt.validate()?;
    if let Some(exact) = measure.exact() {
        let q = alt.rationalized()?;
        return Ok(identity_checks(&q.reassemble(), &exact.atoms().map(|(x, p)| (x.clone(), p.clone())).collect::<Vec<_>>()));
    }
    let table = measure.table().ok_or(OptimalError::NotDiscrete)?;
    Ok(identity_checks(&alt.reassemble(), &table.atoms().map(|(x, p)| (*x, *p)).collect::<Vec<_>>()))
}

/// [`mixture_identity`] for an alternative given in rationals.
pub fn mixture_identity_exact(
    alt: &AlternativeDisintegration<Rational>,
    measure: &ZeroMeanMeasure,
) -> Result<Vec<IdentityCheck>> {
    alt.validate()?;
    let exact = measure.exact().ok_or(OptimalError::NotDiscrete)?;
    let target: Vec<(Rational, Rational)> = exact.atoms().map(|(x, p)| (x.clone(), p.clone())).collect();
    Ok(identity_checks(&alt.reassemble(), &target))
}

fn identity_checks<S: Scalar>(mix: &[(S, S)], target: &[(S, S)]) -> Vec<IdentityCheck> {
    let expect = |law: &[(S, S)], g: &dyn Fn(&S) -> S| law.iter().fold(S::zero(), |acc, (x, p)| acc + g(x) * p.clone());
    let mut tests: Vec<(String, Box<dyn Fn(&S) -> S>)> = vec![
        ("one".into(), Box::new(|_| S::one())),
        ("x_pos".into(), Box::new(move |x: &S| if *x > S::zero() { x.clone() } else { S::zero() })),
        ("x_neg".into(), Box::new(move |x: &S| if *x < S::zero() { -x.clone() } else { S::zero() })),
        ("x_sq".into(), Box::new(|x: &S| x.clone() * x.clone())),
    ];
    let mut points: Vec<S> = target.iter().map(|(x, _)| x.clone()).collect();
    for (x, _) in mix {
        if !points.contains(x) {
            points.push(x.clone());
        }
    }
    for a in points {
        let label = format!("atom({a})");
        tests.push((label, Box::new(move |x: &S| if *x == a { S::one() } else { S::zero() })));
    }
    let one = S::one();
    tests
        .into_iter()
        .map(|(g, f)| {
            let lhs = expect(mix, &*f);
            let rhs = expect(target, &*f);
            let holds = lhs.eq_within(&rhs, &one);
            IdentityCheck { g, mixture: lhs.to_f64(), target: rhs.to_f64(), holds }
        })
        .collect()
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

fn estimate(values: impl Iterator<Item = f64>) -> Estimate {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    Estimate { mean, std_err: (var / n.max(1.0)).sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub cost: String,
    pub hypothesis: Hypothesis,
    pub certificate: Certificate,
    /// `sum nu~(s) k(y_+(s), -y_-(s))`.
    pub alt_cost: f64,
    /// `E k(x_+(H), -x_-(H))`, `H` uniform on `[0, m]`.
    pub canonical_cost: f64,
    pub dominated: bool,
    /// Whether `canonical_cost` was computed exactly (discrete) or by
    /// quadrature.
    pub exact_canonical: bool,
    /// `E k(Y_+, -r(Y_+, U))`.
    pub mc_y_plus: Option<Estimate>,
    /// `E k(r(Y,U), -Y)`, only for symmetric costs.
    pub mc_y: Option<Estimate>,
}

/// Tolerance used for the dominance flag.
pub const DOMINANCE_TOL: f64 = 1e-10;

/// Compares an alternative against the canonical disintegration under a
/// superadditive cost. `n > 0` adds Monte Carlo estimates of the equal
/// tilted-law expressions.
pub fn cost_compare(
    alt: &AlternativeDisintegration<f64>,
    measure: &ZeroMeanMeasure,
    k: &CostFunction,
    n: usize,
    seed: u64,
) -> Result<CostComparison> {
    if !k.hypothesis.admissible() {
        return Err(OptimalError::NoTransportHypothesis);
    }
    let m = measure.m();
    let weights = tilted_weights(alt, &m)?;
    let canonical_pairs: Option<Vec<(f64, f64, f64)>> = match (measure.exact(), measure.table()) {
        (Some(t), _) => Some(t.canonical_pairs().iter().map(|(a, b, p)| (a.to_f64(), b.to_f64(), p.to_f64())).collect()),
        (None, Some(t)) => Some(t.canonical_pairs()),
        _ => None,
    };
    if k.certificate != Certificate::BuiltInAnalytic {
        let mut grid: Vec<f64> = alt.components.iter().flat_map(|c| [c.y_plus, -c.y_minus]).collect();
        if let Some(pairs) = &canonical_pairs {
            grid.extend(pairs.iter().flat_map(|(a, b, _)| [*a, -*b]));
        }
        check_superadditive(k, &grid, &grid, 1e-12)?;
    }
    let alt_cost: f64 = alt
        .components
        .iter()
        .zip(&weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(c, w)| w * k.eval(c.y_plus, -c.y_minus))
        .sum();
    let (canonical_cost, exact_canonical) = match &canonical_pairs {
        Some(pairs) => (pairs.iter().map(|(a, b, p)| p * k.eval(*a, -*b)).sum(), true),
        None => {
            let f = |h: f64| match (measure.x_plus(h), measure.x_minus(h)) {
                (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => k.eval(a, -b),
                _ => 0.0,
            };
            (integrate(f, 0.0, m, 1e-10 * (1.0 + m)) / m, false)
        }
    };
    let dominated = alt_cost <= canonical_cost + DOMINANCE_TOL * (1.0 + canonical_cost.abs());
    let (mc_y_plus, mc_y) = if n > 0 {
        let draws: Vec<PairSample> = disintegration::sample_pairs(measure, n, seed);
        // Tilted expectations as importance-weighted averages over (X, r).
        let plus = estimate(draws.iter().map(|s| if s.x > 0.0 { s.x / m * k.eval(s.x, -s.r) } else { 0.0 }));
        let sym = k.symmetric.then(|| {
            estimate(draws.iter().map(|s| {
                if s.x == 0.0 {
                    0.0
                } else {
                    s.x.abs() / (2.0 * m) * k.eval(s.x.max(s.r), -s.x.min(s.r))
                }
            }))
        });
        (Some(plus), sym)
    } else {
        (None, None)
    };
    Ok(CostComparison {
        cost: k.name.clone(),
        hypothesis: k.hypothesis,
        certificate: k.certificate,
        alt_cost,
        canonical_cost,
        dominated,
        exact_canonical,
        mc_y_plus,
        mc_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// alternative >= canonical
    Ge,
    /// alternative <= canonical
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub name: String,
    pub alternative: f64,
    pub canonical: f64,
    pub relation: Relation,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub p: f64,
    pub entries: Vec<NormEntry>,
}

impl NormReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn get(&self, name: &str) -> Option<&NormEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Ratio, sum and width norms of `(y_+, y_-)` for both disintegrations.
///
/// Entries present depend on `p`: ratio norms for `p > 0`, sum and width
/// norms for `p >= 1`, and `E (y_+ - y_-)^p` for `p <= 0`.
pub fn norm_report(alt: &AlternativeDisintegration<f64>, measure: &ZeroMeanMeasure, p: f64) -> Result<NormReport> {
    if !p.is_finite() {
        return Err(OptimalError::BadP(p));
    }
    let can_law: Vec<(f64, f64, f64)> = match (measure.exact(), measure.table()) {
        (Some(t), _) => t.canonical_pairs().iter().map(|(a, b, p)| (a.to_f64(), b.to_f64(), p.to_f64())).collect(),
        (None, Some(t)) => t.canonical_pairs(),
        _ => return Err(OptimalError::NotDiscrete),
    };
    let weights = tilted_weights(alt, &measure.m())?;
    let alt_law: Vec<(f64, f64, f64)> = alt
        .components
        .iter()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .map(|(c, w)| (c.y_plus, c.y_minus, w))
        .collect();
    let mean = |law: &[(f64, f64, f64)], f: &dyn Fn(f64, f64) -> f64| law.iter().map(|(a, b, w)| w * f(*a, *b)).sum::<f64>();
    let norm = |law: &[(f64, f64, f64)], f: &dyn Fn(f64, f64) -> f64| mean(law, &|a, b| f(a, b).abs().powf(p)).powf(1.0 / p);
    let mut entries = Vec::new();
    let mut push = |name: &str, f: &dyn Fn(&[(f64, f64, f64)]) -> f64, relation: Relation| {
        let alternative = f(&alt_law);
        let canonical = f(&can_law);
        let slack = DOMINANCE_TOL * (1.0 + canonical.abs());
        let holds = match relation {
            Relation::Ge => alternative >= canonical - slack,
            Relation::Le => alternative <= canonical + slack,
        };
        entries.push(NormEntry { name: name.into(), alternative, canonical, relation, holds });
    };
    if p > 0.0 {
        push("ratio_plus", &|l| norm(l, &|a, b| a / b), Relation::Ge);
        push("ratio_minus", &|l| norm(l, &|a, b| b / a), Relation::Ge);
        push(
            "ratio_two_sided",
            &|l| mean(l, &|a, b| (a / b).abs().powf(p) + (b / a).abs().powf(p)),
            Relation::Ge,
        );
    }
    if p >= 1.0 {
        push("sum", &|l| norm(l, &|a, b| a + b), Relation::Ge);
        push("width", &|l| norm(l, &|a, b| a - b), Relation::Le);
    }
    if p <= 0.0 {
        push("width_power", &|l| mean(l, &|a, b| (a - b).powf(p)), Relation::Le);
    }
    Ok(NormReport { p, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityReport {
    pub n: usize,
    pub permutations: usize,
    /// `E k` under the sorted pairing.
    pub comonotone: f64,
    /// Maximum of `E k` over all permutation couplings.
    pub best: f64,
    pub holds: bool,
}

/// Largest supported sample size for [`comonotone_extremality`].
pub const MAX_PERMUTATION_N: usize = 7;

/// Brute-force check that the sorted pairing of two uniform marginals on `n`
/// points maximizes `E k` over all `n!` couplings.
pub fn comonotone_extremality(mu1: &[f64], mu2: &[f64], k: &CostFunction) -> Result<ExtremalityReport> {
    let n = mu1.len();
    if n != mu2.len() {
        return Err(OptimalError::UnsupportedMarginals(format!("sizes {} and {} differ", n, mu2.len())));
    }
    if n == 0 || n > MAX_PERMUTATION_N {
        return Err(OptimalError::UnsupportedMarginals(format!("need 1..={MAX_PERMUTATION_N} points, got {n}")));
    }
    if mu1.iter().chain(mu2).any(|x| !x.is_finite()) {
        return Err(OptimalError::UnsupportedMarginals("non-finite point".into()));
    }
    let mut xs = mu1.to_vec();
    let mut ys = mu2.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let value = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| k.eval(xs[i], ys[j])).sum::<f64>() / n as f64;
    let identity: Vec<usize> = (0..n).collect();
    let comonotone = value(&identity);
    let mut best = f64::NEG_INFINITY;
    let mut permutations = 0;
    for perm in (0..n).permutations(n) {
        best = best.max(value(&perm));
        permutations += 1;
    }
    let holds = comonotone >= best - DOMINANCE_TOL * (1.0 + best.abs());
    Ok(ExtremalityReport { n, permutations, comonotone, best, holds })
}
