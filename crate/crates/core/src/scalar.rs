//! Numeric backends shared by the discrete algorithms.
//!
//! Discrete tables are generic over [`Scalar`] so the same code runs in exact
//! rational arithmetic and in `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

/// Relative slack used when comparing floating-point G levels.
pub const LEVEL_RTOL: f64 = 1e-12;

pub trait Scalar:
    Clone
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    /// `None` for non-finite input. Rationals pick the simplest fraction that
    /// rounds back to `x`.
    fn from_f64(x: f64) -> Option<Self>;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// `self >= other`, allowing rounding noise relative to `scale`.
    fn ge_within(&self, other: &Self, scale: &Self) -> bool;

    fn eq_within(&self, other: &Self, scale: &Self) -> bool {
        self.ge_within(other, scale) && other.ge_within(self, scale)
    }

    fn from_int(k: i64) -> Self;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn ge_within(&self, other: &Self, scale: &Self) -> bool {
        *self >= *other - LEVEL_RTOL * scale.abs()
    }

    fn from_int(k: i64) -> Self {
        k as f64
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Option<Self> {
        rationalize(x)
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn ge_within(&self, other: &Self, _scale: &Self) -> bool {
        self >= other
    }

    fn from_int(k: i64) -> Self {
        Rational::from_integer(BigInt::from(k))
    }
}

/// Simplest rational whose nearest `f64` is exactly `x` (continued fractions).
pub fn rationalize(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let exact = Rational::from_float(x)?;
    if exact.is_integer() {
        return Some(exact);
    }
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rem = exact.clone();
    for _ in 0..128 {
        let a = rem.floor().to_integer();
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        let cand = Rational::new(h2.clone(), k2.clone());
        if ToPrimitive::to_f64(&cand) == Some(x) {
            return Some(cand);
        }
        let frac = &rem - Rational::from_integer(a);
        if frac.is_zero() {
            break;
        }
        rem = frac.recip();
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
    }
    Some(exact)
}

/// Parses `"3/10"`, `"-2"` or a decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Ok(k) = s.parse::<BigInt>() {
        return Some(Rational::from_integer(k));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}0").parse().ok()?;
    let scale = exp - frac.len() as i32 - 1;
    let ten = Rational::from_integer(BigInt::from(10));
    let mut q = Rational::from_integer(digits);
    q = if scale >= 0 {
        q * num_traits::pow(ten, scale as usize)
    } else {
        q / num_traits::pow(ten, (-scale) as usize)
    };
    Some(if neg { -q } else { q })
}

/// A value on the extended real line.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub enum Ext<S> {
    NegInf,
    Finite(S),
    PosInf,
}

impl<S: Scalar> Ext<S> {
    pub fn zero() -> Self {
        Ext::Finite(S::zero())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::NegInf => f64::NEG_INFINITY,
            Ext::Finite(v) => v.to_f64(),
            Ext::PosInf => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<&S> {
        match self {
            Ext::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_nonneg(&self) -> bool {
        match self {
            Ext::NegInf => false,
            Ext::Finite(v) => *v >= S::zero(),
            Ext::PosInf => true,
        }
    }

    pub fn is_nonpos(&self) -> bool {
        match self {
            Ext::NegInf => true,
            Ext::Finite(v) => *v <= S::zero(),
            Ext::PosInf => false,
        }
    }

    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() {
            None
        } else if x == f64::INFINITY {
            Some(Ext::PosInf)
        } else if x == f64::NEG_INFINITY {
            Some(Ext::NegInf)
        } else {
            S::from_f64(x).map(Ext::Finite)
        }
    }
}

impl<S: Scalar> fmt::Display for Ext<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::NegInf => f.write_str("-inf"),
            Ext::Finite(v) => write!(f, "{v}"),
            Ext::PosInf => f.write_str("inf"),
        }
    }
}
