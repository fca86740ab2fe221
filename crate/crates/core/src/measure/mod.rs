//! Zero-mean measures, their G curve and the reciprocating function.

mod analytic;
mod table;

use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analytic::{AnalyticLaw, GCurveLaw, ShiftedExponential, Uniform};
pub use table::{AtomTable, HInterval, USegment};

use crate::scalar::{rationalize, Ext, Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("mean {mean:e} exceeds tolerance {tolerance:e}")]
    NonZeroMean { mean: f64, tolerance: f64 },
    #[error("all mass sits at zero")]
    DegenerateAtZero,
    #[error("bad mass: {0}")]
    BadMass(String),
    #[error("empty sample")]
    EmptySample,
    #[error("constant sample")]
    ConstantSample,
    #[error("non-finite location {0}")]
    NonFinite(f64),
    #[error("negative level h = {0}")]
    NegativeH(f64),
}

impl MeasureError {
    /// Variant name, e.g. `"NonZeroMean"`.
    pub fn kind(&self) -> &'static str {
        match self {
            MeasureError::NonZeroMean { .. } => "NonZeroMean",
            MeasureError::DegenerateAtZero => "DegenerateAtZero",
            MeasureError::BadMass(_) => "BadMass",
            MeasureError::EmptySample => "EmptySample",
            MeasureError::ConstantSample => "ConstantSample",
            MeasureError::NonFinite(_) => "NonFinite",
            MeasureError::NegativeH(_) => "NegativeH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Discrete,
    Empirical,
    Analytic,
}

/// A query point `(x, u)` for the randomized functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GQuery {
    pub x: f64,
    pub u: f64,
}

impl GQuery {
    pub fn new(x: f64, u: f64) -> Result<Self, MeasureError> {
        if x.is_nan() {
            return Err(MeasureError::NonFinite(x));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(MeasureError::BadMass(format!("u = {u} outside [0, 1]")));
        }
        Ok(GQuery { x, u })
    }
}

pub const DEFAULT_MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Clone)]
pub(crate) enum Repr {
    Exact { exact: Arc<AtomTable<Rational>>, float: Arc<AtomTable<f64>> },
    Float(Arc<AtomTable<f64>>),
    Analytic(Arc<dyn AnalyticLaw>),
}

/// A zero-mean probability law on the real line.
///
/// Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct ZeroMeanMeasure {
    backend: Backend,
    pub(crate) repr: Repr,
    mean_tolerance: f64,
}

impl fmt::Debug for ZeroMeanMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ZeroMeanMeasure");
        d.field("backend", &self.backend).field("m", &self.m());
        match &self.repr {
            Repr::Exact { float, .. } | Repr::Float(float) => d.field("atoms", &float.locs.len()),
            Repr::Analytic(law) => d.field("law", &law.name()),
        };
        d.finish()
    }
}

fn sorted_merged<S: Scalar>(mut atoms: Vec<(S, S)>) -> Vec<(S, S)> {
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(S, S)> = Vec::with_capacity(atoms.len());
    for (x, p) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = last.1.clone() + p,
            _ => out.push((x, p)),
        }
    }
    out
}

fn check_sides<S: Scalar>(atoms: &[(S, S)]) -> Result<(), MeasureError> {
    if atoms.iter().all(|(x, _)| x.is_zero()) {
        return Err(MeasureError::DegenerateAtZero);
    }
    Ok(())
}

impl ZeroMeanMeasure {
    /// Discrete measure from `(location, mass)` pairs. Floats are read as the
    /// shortest fractions that round to them, so `0.1` means `1/10`.
    pub fn from_atoms(pairs: &[(f64, f64)], recentre: bool) -> Result<Self, MeasureError> {
        Self::from_atoms_tol(pairs, recentre, DEFAULT_MEAN_TOLERANCE)
    }

    pub fn from_atoms_tol(pairs: &[(f64, f64)], recentre: bool, tol: f64) -> Result<Self, MeasureError> {
        let mut exact = Vec::with_capacity(pairs.len());
        for &(x, p) in pairs {
            let xq = rationalize(x).ok_or(MeasureError::NonFinite(x))?;
            let pq = rationalize(p).ok_or_else(|| MeasureError::BadMass(format!("{p}")))?;
            exact.push((xq, pq));
        }
        Self::from_rational_atoms_tol(exact, recentre, tol)
    }

    pub fn from_rational_atoms(pairs: Vec<(Rational, Rational)>, recentre: bool) -> Result<Self, MeasureError> {
        Self::from_rational_atoms_tol(pairs, recentre, DEFAULT_MEAN_TOLERANCE)
    }

    pub fn from_rational_atoms_tol(
        pairs: Vec<(Rational, Rational)>,
        recentre: bool,
        tol: f64,
    ) -> Result<Self, MeasureError> {
        if pairs.is_empty() {
            return Err(MeasureError::BadMass("no atoms".into()));
        }
        if let Some((_, p)) = pairs.iter().find(|(_, p)| !p.is_positive()) {
            return Err(MeasureError::BadMass(format!("mass {p} is not positive")));
        }
        let total: Rational = pairs.iter().map(|(_, p)| p.clone()).sum();
        if (total.to_f64() - 1.0).abs() > 1e-12 {
            return Err(MeasureError::BadMass(format!("masses sum to {total}")));
        }
        let mut atoms: Vec<(Rational, Rational)> =
            pairs.into_iter().map(|(x, p)| (x, p / total.clone())).collect();
        let mean: Rational = atoms.iter().map(|(x, p)| x.clone() * p.clone()).sum();
        if recentre && !mean.is_zero() {
            for a in atoms.iter_mut() {
                a.0 = a.0.clone() - mean.clone();
            }
        }
        let atoms = sorted_merged(atoms);
        check_sides(&atoms)?;
        let mean: Rational = atoms.iter().map(|(x, p)| x.clone() * p.clone()).sum();
        let abs_mean: Rational = atoms.iter().map(|(x, p)| x.abs() * p.clone()).sum();
        let bound = tol * abs_mean.to_f64();
        if mean.to_f64().abs() > bound {
            return Err(MeasureError::NonZeroMean { mean: mean.to_f64(), tolerance: bound });
        }
        let exact = AtomTable::build(atoms);
        let float = exact.to_f64_table();
        Ok(ZeroMeanMeasure {
            backend: Backend::Discrete,
            repr: Repr::Exact { exact: Arc::new(exact), float: Arc::new(float) },
            mean_tolerance: tol,
        })
    }

    /// Equal-weight measure on a sample; ties are merged.
    pub fn from_samples(xs: &[f64], recentre: bool) -> Result<Self, MeasureError> {
        if xs.is_empty() {
            return Err(MeasureError::EmptySample);
        }
        if let Some(&x) = xs.iter().find(|x| !x.is_finite()) {
            return Err(MeasureError::NonFinite(x));
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return Err(MeasureError::ConstantSample);
        }
        let n = xs.len() as f64;
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for x in sorted {
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += 1.0,
                _ => atoms.push((x, 1.0)),
            }
        }
        for a in atoms.iter_mut() {
            a.1 /= n;
        }
        if recentre {
            let mean = kahan(atoms.iter().map(|(x, p)| x * p));
            for a in atoms.iter_mut() {
                a.0 -= mean;
            }
            // Shifting can merge neighbours only if they were equal already.
        }
        Self::from_float_atoms(atoms, Backend::Empirical, DEFAULT_MEAN_TOLERANCE)
    }

    pub(crate) fn from_float_atoms(atoms: Vec<(f64, f64)>, backend: Backend, tol: f64) -> Result<Self, MeasureError> {
        let atoms = sorted_merged(atoms);
        check_sides(&atoms)?;
        let mean = kahan(atoms.iter().map(|(x, p)| x * p));
        let abs_mean = kahan(atoms.iter().map(|(x, p)| x.abs() * p));
        let bound = tol * abs_mean;
        if mean.abs() > bound {
            return Err(MeasureError::NonZeroMean { mean, tolerance: bound });
        }
        Ok(ZeroMeanMeasure {
            backend,
            repr: Repr::Float(Arc::new(AtomTable::build(atoms))),
            mean_tolerance: tol,
        })
    }

    pub fn from_analytic(law: Arc<dyn AnalyticLaw>) -> Result<Self, MeasureError> {
        let m = law.m();
        if !(m.is_finite() && m > 0.0) {
            return Err(MeasureError::DegenerateAtZero);
        }
        Ok(ZeroMeanMeasure { backend: Backend::Analytic, repr: Repr::Analytic(law), mean_tolerance: 0.0 })
    }

    pub fn uniform(half_width: f64) -> Result<Self, MeasureError> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(MeasureError::BadMass(format!("half width {half_width}")));
        }
        Self::from_analytic(Arc::new(Uniform { half_width }))
    }

    pub fn shifted_exponential() -> Self {
        Self::from_analytic(Arc::new(ShiftedExponential)).expect("valid law")
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn mean_tolerance(&self) -> f64 {
        self.mean_tolerance
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.repr, Repr::Analytic(_))
    }

    /// The exact rational table, when the measure was built from rationals.
    pub fn exact(&self) -> Option<&AtomTable<Rational>> {
        match &self.repr {
            Repr::Exact { exact, .. } => Some(exact),
            _ => None,
        }
    }

    /// The floating-point atom table of a discrete measure.
    pub fn table(&self) -> Option<&AtomTable<f64>> {
        match &self.repr {
            Repr::Exact { float, .. } | Repr::Float(float) => Some(float),
            Repr::Analytic(_) => None,
        }
    }

    pub fn law(&self) -> Option<&dyn AnalyticLaw> {
        match &self.repr {
            Repr::Analytic(law) => Some(&**law),
            _ => None,
        }
    }

    /// Atoms as `(location, mass)`; `None` for analytic measures.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        self.table().map(|t| t.atoms().map(|(x, p)| (*x, *p)).collect())
    }

    pub fn m(&self) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.m().to_f64(),
            Repr::Float(t) => t.m,
            Repr::Analytic(law) => law.m(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Exact { float, .. } | Repr::Float(float) => {
                (float.locs[0].min(0.0), float.locs[float.locs.len() - 1].max(0.0))
            }
            Repr::Analytic(law) => law.support(),
        }
    }

    /// Natural length scale: `E|X|` for discrete measures.
    pub fn scale(&self) -> f64 {
        match &self.repr {
            Repr::Analytic(law) => law.scale(),
            _ => 2.0 * self.m(),
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.g(&ext_q(x)).to_f64(),
            Repr::Float(t) => t.g(&ext_f(x)),
            Repr::Analytic(law) => {
                if x.is_infinite() {
                    law.m()
                } else {
                    law.g(x)
                }
            }
        }
    }

    fn g_inner(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.g_inner(&ext_q(x)).to_f64(),
            Repr::Float(t) => t.g_inner(&ext_f(x)),
            Repr::Analytic(law) => {
                if x.is_infinite() {
                    law.m()
                } else {
                    law.g_inner(x)
                }
            }
        }
    }

    /// `u` is clamped to `[0, 1]`.
    pub fn g_tilde(&self, x: f64, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.repr {
            Repr::Exact { exact, .. } => exact.g_tilde(&ext_q(x), &q(u)).to_f64(),
            Repr::Float(t) => t.g_tilde(&ext_f(x), &u),
            Repr::Analytic(_) => {
                let inner = self.g_inner(x);
                inner + (self.g(x) - inner) * u
            }
        }
    }

    pub fn x_plus(&self, h: f64) -> Result<f64, MeasureError> {
        if h < 0.0 || h.is_nan() {
            return Err(MeasureError::NegativeH(h));
        }
        Ok(self.x_plus_unchecked(h))
    }

    pub fn x_minus(&self, h: f64) -> Result<f64, MeasureError> {
        if h < 0.0 || h.is_nan() {
            return Err(MeasureError::NegativeH(h));
        }
        Ok(self.x_minus_unchecked(h))
    }

    fn x_plus_unchecked(&self, h: f64) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.x_plus(&q(h)).to_f64(),
            Repr::Float(t) => t.x_plus(&h).to_f64(),
            Repr::Analytic(law) => law.x_plus(h),
        }
    }

    fn x_minus_unchecked(&self, h: f64) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.x_minus(&q(h)).to_f64(),
            Repr::Float(t) => t.x_minus(&h).to_f64(),
            Repr::Analytic(law) => law.x_minus(h),
        }
    }

    /// The reciprocating function `r(x, u)`.
    pub fn reciprocate(&self, x: f64, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.repr {
            Repr::Exact { exact, .. } => exact.reciprocate(&ext_q(x), &q(u)).to_f64(),
            Repr::Float(t) => t.reciprocate(&ext_f(x), &u).to_f64(),
            Repr::Analytic(_) => {
                let h = self.g_tilde(x, u);
                if x >= 0.0 {
                    self.x_minus_unchecked(h)
                } else {
                    self.x_plus_unchecked(h)
                }
            }
        }
    }

    /// The regularizing function `x_hat(x, u)`.
    pub fn regularize(&self, x: f64, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.repr {
            Repr::Exact { exact, .. } => exact.regularize(&ext_q(x), &q(u)).to_f64(),
            Repr::Float(t) => t.regularize(&ext_f(x), &u).to_f64(),
            Repr::Analytic(_) => {
                let h = self.g_tilde(x, u);
                if x >= 0.0 {
                    self.x_plus_unchecked(h)
                } else {
                    self.x_minus_unchecked(h)
                }
            }
        }
    }

    pub fn v_map(&self, x: f64, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.repr {
            Repr::Exact { exact, .. } => exact.v_map(&ext_q(x), &q(u)).to_f64(),
            Repr::Float(t) => t.v_map(&ext_f(x), &u),
            Repr::Analytic(_) => {
                let h = self.g_tilde(x, u);
                let y = self.reciprocate(x, u);
                let (gy, inner) = (self.g(y), self.g_inner(y));
                if gy == inner {
                    1.0
                } else {
                    ((h - inner) / (gy - inner)).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn reciprocate_q(&self, q: GQuery) -> f64 {
        self.reciprocate(q.x, q.u)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.is_symmetric(&q(tol.max(0.0))),
            Repr::Float(t) => t.is_symmetric(&tol),
            Repr::Analytic(law) => {
                let scale = law.scale();
                (1..=200).all(|k| {
                    let x = scale * 8.0 * k as f64 / 200.0;
                    (law.g(x) - law.g(-x)).abs() <= tol.max(1e-12 * law.m())
                })
            }
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.cdf(&q_clamped(x)).to_f64(),
            Repr::Float(t) => t.cdf(&x),
            Repr::Analytic(law) => law.cdf(x),
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Exact { exact, .. } => exact.cdf_left(&q_clamped(x)).to_f64(),
            Repr::Float(t) => t.cdf_left(&x),
            Repr::Analytic(law) => law.cdf_left(x),
        }
    }

    /// Randomized distribution function `F(x-) + (F(x) - F(x-)) u`.
    pub fn f_tilde(&self, x: f64, u: f64) -> f64 {
        let left = self.cdf_left(x);
        left + (self.cdf(x) - left) * u.clamp(0.0, 1.0)
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.cdf(x) - self.cdf_left(x)
    }

    /// Generalized quantile `inf{x : F(x) >= t}`.
    pub fn quantile(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Exact { float, .. } | Repr::Float(float) => {
                let k = float.cdf.partition_point(|&c| c < t);
                float.locs[k.min(float.locs.len() - 1)]
            }
            Repr::Analytic(law) => law.quantile(t),
        }
    }
}

fn q(x: f64) -> Rational {
    rationalize(x).unwrap_or_else(Rational::zero)
}

fn q_clamped(x: f64) -> Rational {
    if x == f64::INFINITY {
        Rational::from_integer(i64::MAX.into())
    } else if x == f64::NEG_INFINITY {
        Rational::from_integer(i64::MIN.into())
    } else {
        q(x)
    }
}

fn ext_q(x: f64) -> Ext<Rational> {
    Ext::from_f64(x).unwrap_or(Ext::Finite(Rational::zero()))
}

fn ext_f(x: f64) -> Ext<f64> {
    Ext::from_f64(x).unwrap_or(Ext::Finite(0.0))
}

pub(crate) fn kahan(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
