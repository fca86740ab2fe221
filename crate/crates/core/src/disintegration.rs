//! Mixtures of two-point zero-mean laws: exact decomposition, pair sampling,
//! the mixture identities and the tilted laws.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{AtomTable, MeasureError, Repr, ZeroMeanMeasure};
use crate::numerics::{integrate, ks_uniform, ks_uniform_weighted};
use crate::rng;
use crate::scalar::{Ext, Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisintegrationError {
    #[error("two-point law needs a*b <= 0, got a = {a}, b = {b}")]
    SameSign { a: f64, b: f64 },
    #[error("operation needs a discrete measure")]
    NotDiscrete,
    #[error("integrand is unbounded on the support")]
    Unbounded,
    #[error("function takes {got} arguments, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

type Result<T> = std::result::Result<T, DisintegrationError>;

/// The zero-mean law on `{a, b}` with `a * b <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointLaw<S = f64> {
    pub a: S,
    pub b: S,
    pub p_a: S,
    pub p_b: S,
}

impl<S: Scalar> TwoPointLaw<S> {
    pub fn new(a: S, b: S) -> Result<Self> {
        let zero = S::zero();
        let prod = a.clone() * b.clone();
        if prod > zero {
            return Err(DisintegrationError::SameSign { a: a.to_f64(), b: b.to_f64() });
        }
        if prod.is_zero() {
            // Point mass at zero, carried by whichever endpoint is zero.
            let (p_a, p_b) = if a.is_zero() { (S::one(), zero) } else { (zero, S::one()) };
            return Ok(TwoPointLaw { a, b, p_a, p_b });
        }
        let p_a = b.clone() / (b.clone() - a.clone());
        let p_b = a.clone() / (a.clone() - b.clone());
        Ok(TwoPointLaw { a, b, p_a, p_b })
    }

    pub fn is_degenerate(&self) -> bool {
        (self.a.clone() * self.b.clone()).is_zero()
    }

    pub fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        let mut v = 0.0;
        if !self.p_a.is_zero() {
            v += self.p_a.to_f64() * g(self.a.to_f64());
        }
        if !self.p_b.is_zero() {
            v += self.p_b.to_f64() * g(self.b.to_f64());
        }
        v
    }

    /// `E X^+`.
    pub fn positive_part_mean(&self) -> S {
        let zero = S::zero();
        let part = |x: &S, p: &S| if *x > zero { x.clone() * p.clone() } else { S::zero() };
        part(&self.a, &self.p_a) + part(&self.b, &self.p_b)
    }

    /// `E R/X` with `R = ab/X`, by the closed form `-1 + (a+b)^2/(ab)`.
    pub fn ratio_r_over_x(&self) -> S {
        if self.is_degenerate() {
            return -S::one();
        }
        let s = self.a.clone() + self.b.clone();
        -S::one() + s.clone() * s / (self.a.clone() * self.b.clone())
    }

    /// `E R/X` by enumerating the two outcomes.
    pub fn ratio_r_over_x_direct(&self) -> S {
        if self.is_degenerate() {
            return -S::one();
        }
        self.p_a.clone() * (self.b.clone() / self.a.clone()) + self.p_b.clone() * (self.a.clone() / self.b.clone())
    }

    /// `E X/R`, which is `-1` for every law.
    pub fn ratio_x_over_r(&self) -> S {
        if self.is_degenerate() {
            return -S::one();
        }
        self.p_a.clone() * (self.a.clone() / self.b.clone()) + self.p_b.clone() * (self.b.clone() / self.a.clone())
    }

    pub fn to_f64(&self) -> TwoPointLaw<f64> {
        TwoPointLaw { a: self.a.to_f64(), b: self.b.to_f64(), p_a: self.p_a.to_f64(), p_b: self.p_b.to_f64() }
    }
}

pub fn two_point(a: f64, b: f64) -> Result<TwoPointLaw<f64>> {
    if !a.is_finite() || !b.is_finite() {
        return Err(MeasureError::NonFinite(if a.is_finite() { b } else { a }).into());
    }
    TwoPointLaw::new(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component<S = f64> {
    pub weight: S,
    pub law: TwoPointLaw<S>,
}

/// A finite mixture of two-point zero-mean laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDecomposition<S = f64> {
    pub components: Vec<Component<S>>,
}

impl<S: Scalar> MixtureDecomposition<S> {
    pub fn total_weight(&self) -> S {
        self.components.iter().fold(S::zero(), |acc, c| acc + c.weight.clone())
    }

    /// The mixed law, as merged atoms in increasing order.
    pub fn reassemble(&self) -> Vec<(S, S)> {
        let mut atoms: Vec<(S, S)> = Vec::new();
        for c in &self.components {
            for (x, p) in [(&c.law.a, &c.law.p_a), (&c.law.b, &c.law.p_b)] {
                if p.is_zero() {
                    continue;
                }
                let mass = c.weight.clone() * p.clone();
                match atoms.iter_mut().find(|(y, _)| y == x) {
                    Some(slot) => slot.1 = slot.1.clone() + mass,
                    None => atoms.push((x.clone(), mass)),
                }
            }
        }
        atoms.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap());
        atoms
    }

    pub fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        self.components.iter().map(|c| c.weight.to_f64() * c.law.expect(g)).sum()
    }

    pub fn to_f64(&self) -> MixtureDecomposition<f64> {
        MixtureDecomposition {
            components: self
                .components
                .iter()
                .map(|c| Component { weight: c.weight.to_f64(), law: c.law.to_f64() })
                .collect(),
        }
    }
}

impl<S: Scalar> AtomTable<S> {
    /// The canonical disintegration, one component per unordered pair `{x, r}`.
    pub fn decompose(&self) -> MixtureDecomposition<S> {
        let mut weights: BTreeMap<(usize, usize), S> = BTreeMap::new();
        for iv in self.h_intervals() {
            let x = &self.locs[iv.pos];
            let y = &self.locs[iv.neg];
            let w = (iv.hi.clone() - iv.lo.clone()) * (S::one() / x.clone() + S::one() / y.abs_val());
            let slot = weights.entry((iv.neg, iv.pos)).or_insert_with(S::zero);
            *slot = slot.clone() + w;
        }
        if let Some(z) = self.zero {
            weights.insert((z, z), self.masses[z].clone());
        }
        let components = weights
            .into_iter()
            .map(|((a, b), weight)| Component {
                weight,
                law: TwoPointLaw::new(self.locs[a].clone(), self.locs[b].clone()).expect("opposite signs"),
            })
            .collect();
        MixtureDecomposition { components }
    }

    /// Law of the pair `(x_+(H), x_-(H))` for `H` uniform on `[0, m]`, as
    /// `(x_+, x_-, probability)`.
    pub fn canonical_pairs(&self) -> Vec<(S, S, S)> {
        self.h_intervals()
            .into_iter()
            .map(|iv| {
                let p = (iv.hi - iv.lo) / self.m.clone();
                (self.locs[iv.pos].clone(), self.locs[iv.neg].clone(), p)
            })
            .collect()
    }

    /// `(E X/r(X,U), E r(X,U)/X)` with both ratios read as `-1` on `{X = 0}`.
    pub fn ratio_moments(&self) -> (S, S) {
        let mut ex_r = S::zero();
        let mut er_x = S::zero();
        for (i, segs) in self.u_segments().into_iter().enumerate() {
            let x = &self.locs[i];
            let p = &self.masses[i];
            for s in segs {
                let w = p.clone() * (s.u_hi - s.u_lo);
                if x.is_zero() {
                    ex_r = ex_r - w.clone();
                    er_x = er_x - w;
                } else {
                    ex_r = ex_r + w.clone() * (x.clone() / s.partner.clone());
                    er_x = er_x + w * (s.partner / x.clone());
                }
            }
        }
        (ex_r, er_x)
    }

    /// `(H_+(h), H_-(h))` with `H_+(h) = E[X; X > 0, G~(X,U) <= h]` and the
    /// mirrored negative counterpart, by exact segment enumeration.
    pub fn h_identity(&self, h: &S) -> (S, S) {
        let mut plus = S::zero();
        let mut minus = S::zero();
        for (x, p) in self.atoms() {
            if x.is_zero() {
                continue;
            }
            let xe = Ext::Finite(x.clone());
            let g0 = self.g_tilde(&xe, &S::zero());
            let g1 = self.g_tilde(&xe, &S::one());
            // G~(x, .) is affine: measure of {u : G~(x,u) <= h}.
            let frac = if *h >= g1 {
                S::one()
            } else if *h <= g0 {
                S::zero()
            } else {
                (h.clone() - g0.clone()) / (g1 - g0)
            };
            let v = x.abs_val() * p.clone() * frac;
            if *x > S::zero() {
                plus = plus + v;
            } else {
                minus = minus + v;
            }
        }
        (plus, minus)
    }

    /// Joint law of `(X, r(X,U))` as `(x, r, probability)`.
    pub fn pair_law(&self) -> Vec<(S, S, S)> {
        let mut out = Vec::new();
        for (i, segs) in self.u_segments().into_iter().enumerate() {
            for s in segs {
                out.push((self.locs[i].clone(), s.partner, self.masses[i].clone() * (s.u_hi - s.u_lo)));
            }
        }
        out
    }

    pub fn tilt(&self, which: Tilt) -> Vec<(S, S)> {
        let two_m = self.m.clone() + self.m.clone();
        self.atoms()
            .filter_map(|(x, p)| {
                let zero = S::zero();
                let w = match which {
                    Tilt::Y if !x.is_zero() => x.abs_val() * p.clone() / two_m.clone(),
                    Tilt::YPlus if *x > zero => x.clone() * p.clone() / self.m.clone(),
                    Tilt::YMinus if *x < zero => x.abs_val() * p.clone() / self.m.clone(),
                    _ => return None,
                };
                Some((x.clone(), w))
            })
            .collect()
    }
}

/// Canonical disintegration of a discrete measure, in floating point.
pub fn decompose(measure: &ZeroMeanMeasure) -> Result<MixtureDecomposition<f64>> {
    match &measure.repr {
        Repr::Exact { exact, .. } => Ok(exact.decompose().to_f64()),
        Repr::Float(t) => Ok(t.decompose()),
        Repr::Analytic(_) => Err(DisintegrationError::NotDiscrete),
    }
}

/// Canonical disintegration in exact arithmetic.
pub fn decompose_exact(measure: &ZeroMeanMeasure) -> Result<MixtureDecomposition<Rational>> {
    measure.exact().map(AtomTable::decompose).ok_or(DisintegrationError::NotDiscrete)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub x: f64,
    pub r: f64,
    pub u: f64,
}

/// Draws `(X, r(X,U), U)`; tables are precomputed for discrete measures.
#[derive(Clone)]
pub struct PairSampler {
    inner: SamplerKind,
}

#[derive(Clone)]
enum SamplerKind {
    Table { locs: Vec<f64>, cum: Vec<f64>, segs: Vec<Vec<(f64, f64)>> },
    Analytic(ZeroMeanMeasure),
}

fn table_parts<S: Scalar>(t: &AtomTable<S>) -> SamplerKind {
    let segs = t
        .u_segments()
        .into_iter()
        .map(|list| list.into_iter().map(|s| (s.u_hi.to_f64(), s.partner.to_f64())).collect())
        .collect();
    SamplerKind::Table {
        locs: t.locs.iter().map(S::to_f64).collect(),
        cum: t.cdf.iter().map(S::to_f64).collect(),
        segs,
    }
}

impl PairSampler {
    pub fn new(measure: &ZeroMeanMeasure) -> Self {
        let inner = match &measure.repr {
            Repr::Exact { exact, .. } => table_parts(&**exact),
            Repr::Float(t) => table_parts(&**t),
            Repr::Analytic(_) => SamplerKind::Analytic(measure.clone()),
        };
        PairSampler { inner }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PairSample {
        let t: f64 = rng.sample(Open01);
        let u: f64 = rng.sample(Open01);
        match &self.inner {
            SamplerKind::Table { locs, cum, segs } => {
                let i = cum.partition_point(|&c| c < t).min(locs.len() - 1);
                let list = &segs[i];
                let k = list.partition_point(|s| s.0 < u).min(list.len() - 1);
                PairSample { x: locs[i], r: list[k].1, u }
            }
            SamplerKind::Analytic(m) => {
                let x = m.quantile(t);
                PairSample { x, r: m.reciprocate(x, u), u }
            }
        }
    }
}

pub fn sample_pair(measure: &ZeroMeanMeasure, seed: u64) -> PairSample {
    PairSampler::new(measure).draw(&mut rng::stream(seed, "sample_pair"))
}

const SHARDS: usize = 16;

/// `n` seeded pair draws; the result does not depend on the thread count.
pub fn sample_pairs(measure: &ZeroMeanMeasure, n: usize, seed: u64) -> Vec<PairSample> {
    let sampler = PairSampler::new(measure);
    sharded(n, seed, "sample_pairs", |rng, k| (0..k).map(|_| sampler.draw(rng)).collect())
}

/// Partners `r(x_i, u_i)` of given observations with seeded `u_i`.
pub fn partners(measure: &ZeroMeanMeasure, xs: &[f64], seed: u64) -> Vec<PairSample> {
    let mut rng = rng::stream(seed, "partners");
    xs.iter()
        .map(|&x| {
            let u: f64 = rng.sample(Open01);
            PairSample { x, r: measure.reciprocate(x, u), u }
        })
        .collect()
}

/// Runs `work(rng, count)` over fixed shards and concatenates in shard order.
pub(crate) fn sharded<T: Send>(
    n: usize,
    seed: u64,
    label: &str,
    work: impl Fn(&mut rng::Rng, usize) -> Vec<T> + Sync,
) -> Vec<T> {
    let per = n.div_ceil(SHARDS);
    (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = per.min(n.saturating_sub(s * per));
            let mut r = rng::shard(seed, label, s);
            work(&mut r, count)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureMode {
    Direct,
    UIntegral,
    HIntegral,
    RatioWeighted,
    HalfSum,
}

impl MixtureMode {
    pub const ALL: [MixtureMode; 5] = [
        MixtureMode::Direct,
        MixtureMode::UIntegral,
        MixtureMode::HIntegral,
        MixtureMode::RatioWeighted,
        MixtureMode::HalfSum,
    ];
}

impl FromStr for MixtureMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "direct" => MixtureMode::Direct,
            "u_integral" => MixtureMode::UIntegral,
            "h_integral" => MixtureMode::HIntegral,
            "ratio_weighted" => MixtureMode::RatioWeighted,
            "half_sum" => MixtureMode::HalfSum,
            _ => return Err(format!("unknown mixture mode '{s}'")),
        })
    }
}

/// `E g` of the two-point law on `{x, r}`, extended to `r = +-inf` by its limit.
fn pair_expect(x: f64, r: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    if x == 0.0 || r == 0.0 {
        return g(0.0);
    }
    if r.is_infinite() {
        return g(x);
    }
    // P(X = x) = r / (r - x).
    let px = r / (r - x);
    px * g(x) + (1.0 - px) * g(r)
}

/// Weight attached to a pair `(x, r)` by each mode, with `0 / r(0,u) := -1`.
fn mode_weight(mode: MixtureMode, x: f64, r: f64) -> f64 {
    let ratio = if x == 0.0 {
        -1.0
    } else if r.is_infinite() {
        0.0
    } else {
        x / r
    };
    match mode {
        MixtureMode::RatioWeighted => -ratio,
        MixtureMode::HalfSum => 0.5 * (1.0 - ratio),
        _ => 1.0,
    }
}

fn discrete_expect<S: Scalar>(t: &AtomTable<S>, g: &dyn Fn(f64) -> f64, mode: MixtureMode) -> f64 {
    let mut terms: Vec<f64> = Vec::new();
    match mode {
        MixtureMode::Direct => {
            terms.extend(t.atoms().map(|(x, p)| p.to_f64() * g(x.to_f64())));
        }
        MixtureMode::UIntegral => {
            for c in t.decompose().components {
                terms.push(c.weight.to_f64() * c.law.expect(g));
            }
        }
        MixtureMode::HIntegral => {
            let g0 = g(0.0);
            terms.push(g0);
            for iv in t.h_intervals() {
                let x = t.locs[iv.pos].to_f64();
                let y = t.locs[iv.neg].to_f64();
                let len = (iv.hi - iv.lo).to_f64();
                terms.push(len * (1.0 / x + 1.0 / y.abs()) * (pair_expect(x, y, g) - g0));
            }
        }
        MixtureMode::RatioWeighted | MixtureMode::HalfSum => {
            for (x, r, p) in t.pair_law() {
                let (x, r) = (x.to_f64(), r.to_f64());
                terms.push(p.to_f64() * mode_weight(mode, x, r) * pair_expect(x, r, g));
            }
        }
    }
    crate::measure::kahan(terms.into_iter())
}

const QUAD_TOL: f64 = 1e-11;

fn analytic_expect(m: &ZeroMeanMeasure, g: &dyn Fn(f64) -> f64, mode: MixtureMode) -> f64 {
    // Integrate over the quantile level t; atoms are randomized by u.
    let point = |t: f64| {
        let x = m.quantile(t);
        let (left, right) = (m.cdf_left(x), m.cdf(x));
        let u = if right > left { ((t - left) / (right - left)).clamp(0.0, 1.0) } else { 0.5 };
        (x, u)
    };
    match mode {
        MixtureMode::Direct => integrate(|t| g(point(t).0), 0.0, 1.0, QUAD_TOL),
        MixtureMode::UIntegral | MixtureMode::RatioWeighted | MixtureMode::HalfSum => integrate(
            |t| {
                let (x, u) = point(t);
                let r = m.reciprocate(x, u);
                mode_weight(mode, x, r) * pair_expect(x, r, g)
            },
            0.0,
            1.0,
            QUAD_TOL,
        ),
        MixtureMode::HIntegral => {
            let g0 = g(0.0);
            g0 + integrate(
                |h| {
                    let (xp, xm) = (m.x_plus(h).unwrap_or(0.0), m.x_minus(h).unwrap_or(0.0));
                    if xp == 0.0 || xm == 0.0 || xp.is_infinite() || xm.is_infinite() {
                        return 0.0;
                    }
                    (1.0 / xp + 1.0 / xm.abs()) * (pair_expect(xp, xm, g) - g0)
                },
                0.0,
                m.m(),
                QUAD_TOL,
            )
        }
    }
}

/// `E g(X)` through one of the five equivalent mixture representations.
pub fn mixture_expect(measure: &ZeroMeanMeasure, g: &dyn Fn(f64) -> f64, mode: MixtureMode) -> Result<f64> {
    let probes: Vec<f64> = match measure.atoms() {
        Some(atoms) => atoms.into_iter().map(|a| a.0).chain([0.0]).collect(),
        None => (1..64).map(|k| measure.quantile(k as f64 / 64.0)).chain([0.0]).collect(),
    };
    if probes.iter().any(|&x| !g(x).is_finite()) {
        return Err(DisintegrationError::Unbounded);
    }
    let v = match &measure.repr {
        Repr::Exact { exact, .. } => discrete_expect(&**exact, g, mode),
        Repr::Float(t) => discrete_expect(&**t, g, mode),
        Repr::Analytic(_) => analytic_expect(measure, g, mode),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DisintegrationError::Unbounded)
    }
}

/// `(E X/r(X,U), E r(X,U)/X)`: exact for discrete measures, Monte Carlo otherwise.
pub fn ratio_moments(measure: &ZeroMeanMeasure, n: usize, seed: u64) -> (f64, f64) {
    match &measure.repr {
        Repr::Exact { exact, .. } => {
            let (a, b) = exact.ratio_moments();
            (a.to_f64(), b.to_f64())
        }
        Repr::Float(t) => t.ratio_moments(),
        Repr::Analytic(_) => {
            let pairs = sample_pairs(measure, n, seed);
            let ratio = |a: f64, b: f64| if a == 0.0 { -1.0 } else if b.is_infinite() { 0.0 } else { a / b };
            let k = pairs.len() as f64;
            let ex_r = pairs.iter().map(|p| ratio(p.x, p.r)).sum::<f64>() / k;
            let er_x = pairs.iter().map(|p| if p.x == 0.0 { -1.0 } else { p.r / p.x }).sum::<f64>() / k;
            (ex_r, er_x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tilt {
    Y,
    YPlus,
    YMinus,
}

/// Tilted law with density `|x|/(2m)`, `x^+/m` or `x^-/m` against the measure.
pub fn tilt(measure: &ZeroMeanMeasure, which: Tilt) -> Result<Vec<(f64, f64)>> {
    match &measure.repr {
        Repr::Exact { exact, .. } => Ok(exact.tilt(which).into_iter().map(|(x, p)| (x.to_f64(), p.to_f64())).collect()),
        Repr::Float(t) => Ok(t.tilt(which)),
        Repr::Analytic(_) => Err(DisintegrationError::NotDiscrete),
    }
}

pub fn tilt_exact(measure: &ZeroMeanMeasure, which: Tilt) -> Result<Vec<(Rational, Rational)>> {
    measure.exact().map(|t| t.tilt(which)).ok_or(DisintegrationError::NotDiscrete)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Uniformity {
    /// `G~(Y, U) / m` under the tilted law `Y`.
    GTildeY,
    /// `F~(X, U)` under the measure itself.
    FTildeX,
}

fn draw_index<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let t: f64 = rng.sample(Open01);
    cum.partition_point(|&c| c < t).min(cum.len() - 1)
}

/// Kolmogorov-Smirnov distance from uniform of `n` seeded draws.
pub fn uniformity_check(measure: &ZeroMeanMeasure, which: Uniformity, n: usize, seed: u64) -> f64 {
    let m = measure.m();
    match (which, measure.table()) {
        (Uniformity::GTildeY, Some(t)) => {
            let y = t.tilt(Tilt::Y);
            let mut cum = Vec::with_capacity(y.len());
            let mut acc = 0.0;
            for (_, p) in &y {
                acc += p;
                cum.push(acc);
            }
            let mut vals = sharded(n, seed, "uniformity/g_tilde_y", |rng, k| {
                (0..k)
                    .map(|_| {
                        let i = draw_index(&cum, rng);
                        let u: f64 = rng.sample(Open01);
                        t.g_tilde(&Ext::Finite(y[i].0), &u) / m
                    })
                    .collect()
            });
            ks_uniform(&mut vals)
        }
        (Uniformity::GTildeY, None) => {
            // Importance weights |x| / (2m) turn draws of X into draws of Y.
            let sampler = PairSampler::new(measure);
            let mut vals = sharded(n, seed, "uniformity/g_tilde_y", |rng, k| {
                (0..k)
                    .map(|_| {
                        let s = sampler.draw(rng);
                        (measure.g_tilde(s.x, s.u) / m, s.x.abs() / (2.0 * m))
                    })
                    .collect()
            });
            ks_uniform_weighted(&mut vals)
        }
        (Uniformity::FTildeX, _) => {
            let sampler = PairSampler::new(measure);
            let mut vals = sharded(n, seed, "uniformity/f_tilde_x", |rng, k| {
                (0..k)
                    .map(|_| {
                        let s = sampler.draw(rng);
                        measure.f_tilde(s.x, s.u)
                    })
                    .collect()
            });
            ks_uniform(&mut vals)
        }
    }
}

/// Monte Carlo check of the product disintegration for independent
/// coordinates: returns `(E g(X1, R1, ..., Xn, Rn), mixture-side estimate)`.
pub fn joint_disintegrate(
    measures: &[ZeroMeanMeasure],
    arity: usize,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let dim = measures.len();
    if arity != 2 * dim || dim == 0 {
        return Err(DisintegrationError::DimensionMismatch { expected: 2 * dim, got: arity });
    }
    let samplers: Vec<PairSampler> = measures.iter().map(PairSampler::new).collect();
    let lhs = sharded(n, seed, "joint/lhs", |rng, k| {
        let mut args = vec![0.0; arity];
        (0..k)
            .map(|_| {
                for (j, s) in samplers.iter().enumerate() {
                    let p = s.draw(rng);
                    args[2 * j] = p.x;
                    args[2 * j + 1] = p.r;
                }
                g(&args)
            })
            .collect()
    });
    let rhs = sharded(n, seed, "joint/rhs", |rng, k| {
        let mut args = vec![0.0; arity];
        (0..k)
            .map(|_| {
                for (j, s) in samplers.iter().enumerate() {
                    let p = s.draw(rng);
                    // Redraw the point within its component {x, r}.
                    let (x, r) = if p.x == 0.0 || p.r == 0.0 {
                        (0.0, 0.0)
                    } else {
                        let px = p.r / (p.r - p.x);
                        let v: f64 = rng.random();
                        if v < px {
                            (p.x, p.r)
                        } else {
                            (p.r, p.x)
                        }
                    };
                    args[2 * j] = x;
                    args[2 * j + 1] = r;
                }
                g(&args)
            })
            .collect()
    });
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok((mean(lhs), mean(rhs)))
}

/// Exact version of [`joint_disintegrate`] for discrete measures, enumerating
/// every combination of atom segments and of component outcomes.
pub fn joint_disintegrate_exact(measures: &[ZeroMeanMeasure], g: &dyn Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
    let mut pair_laws = Vec::new();
    let mut comp_laws = Vec::new();
    for m in measures {
        let t = m.table().ok_or(DisintegrationError::NotDiscrete)?;
        pair_laws.push(t.pair_law());
        comp_laws.push(t.decompose());
    }
    fn lhs_rec(laws: &[Vec<(f64, f64, f64)>], args: &mut Vec<f64>, w: f64, g: &dyn Fn(&[f64]) -> f64) -> f64 {
        match laws.split_first() {
            None => w * g(args),
            Some((first, rest)) => first
                .iter()
                .map(|&(x, r, p)| {
                    args.extend([x, r]);
                    let v = lhs_rec(rest, args, w * p, g);
                    args.truncate(args.len() - 2);
                    v
                })
                .sum(),
        }
    }
    fn rhs_rec(laws: &[MixtureDecomposition<f64>], args: &mut Vec<f64>, w: f64, g: &dyn Fn(&[f64]) -> f64) -> f64 {
        match laws.split_first() {
            None => w * g(args),
            Some((first, rest)) => first
                .components
                .iter()
                .flat_map(|c| {
                    let l = &c.law;
                    [(l.a, l.b, c.weight * l.p_a), (l.b, l.a, c.weight * l.p_b)]
                })
                .filter(|t| t.2 > 0.0)
                .map(|(x, r, p)| {
                    args.extend([x, r]);
                    let v = rhs_rec(rest, args, w * p, g);
                    args.truncate(args.len() - 2);
                    v
                })
                .sum(),
        }
    }
    let lhs = lhs_rec(&pair_laws, &mut Vec::new(), 1.0, g);
    let rhs = rhs_rec(&comp_laws, &mut Vec::new(), 1.0, g);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_masses() {
        let l = two_point(-1.0, 2.0).unwrap();
        assert!((l.p_a - 2.0 / 3.0).abs() < 1e-15 && (l.p_b - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(two_point(1.0, 2.0), Err(DisintegrationError::SameSign { .. })));
        let d = two_point(0.0, 0.0).unwrap();
        assert_eq!((d.p_a, d.p_b), (1.0, 0.0));
    }

    #[test]
    fn pair_expect_handles_infinite_partner() {
        assert_eq!(pair_expect(1.0, f64::NEG_INFINITY, &|x| x * x), 1.0);
        assert_eq!(mode_weight(MixtureMode::HalfSum, 0.0, 0.0), 1.0);
    }
}
