#![allow(dead_code)]

use num_bigint::BigInt;
use proptest::prelude::*;
use twopoint::modeling::ReciprocatingCurve;
use twopoint::{Rational, ZeroMeanMeasure};

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// 1/2 at -1, 1/10 at 0, 3/10 at 1, 1/10 at 2.
pub fn example() -> ZeroMeanMeasure {
    ZeroMeanMeasure::from_atoms(&[(-1.0, 0.5), (0.0, 0.1), (1.0, 0.3), (2.0, 0.1)], false).unwrap()
}

pub fn symmetric_pair() -> ZeroMeanMeasure {
    ZeroMeanMeasure::from_atoms(&[(-1.0, 0.5), (1.0, 0.5)], false).unwrap()
}

pub fn four_atom() -> ZeroMeanMeasure {
    ZeroMeanMeasure::from_atoms(&[(-2.0, 0.1), (-1.0, 0.4), (1.0, 0.4), (2.0, 0.1)], false).unwrap()
}

/// 1/3 at -3, 1/2 at 0, 1/6 at 6.
pub fn zero_heavy() -> ZeroMeanMeasure {
    ZeroMeanMeasure::from_rational_atoms(vec![(q(-3, 1), q(1, 3)), (q(0, 1), q(1, 2)), (q(6, 1), q(1, 6))], false).unwrap()
}

/// Exact zero-mean mixture of two-point laws `(a, b, weight)` plus an atom at 0.
pub fn mixture(parts: &[(i64, i64, i64)], zero_weight: i64) -> ZeroMeanMeasure {
    let total: i64 = parts.iter().map(|p| p.2).sum::<i64>() + zero_weight;
    let mut atoms = Vec::new();
    for &(a, b, w) in parts {
        let w = q(w, total);
        atoms.push((q(a, 1), w.clone() * q(b, b - a)));
        atoms.push((q(b, 1), w * q(a, a - b)));
    }
    if zero_weight > 0 {
        atoms.push((q(0, 1), q(zero_weight, total)));
    }
    ZeroMeanMeasure::from_rational_atoms(atoms, false).unwrap()
}

/// Random exact zero-mean measures built as mixtures of two-point laws.
pub fn measure_strategy() -> impl Strategy<Value = ZeroMeanMeasure> {
    (prop::collection::vec((-6i64..=-1, 1i64..=6, 1i64..=9), 1..5), 0i64..=3)
        .prop_map(|(parts, zero)| mixture(&parts, zero))
}

/// Relative distance from the point `(x, y)` to the graph of `curve`: the
/// smaller of the vertical gap and the horizontal gap (the graph of an
/// involution is symmetric, so both directions count).
pub fn graph_distance(curve: &ReciprocatingCurve, x: f64, y: f64) -> f64 {
    let r = curve.eval(x);
    if r == y {
        return 0.0;
    }
    let vertical = (r - y).abs() / (1.0 + r.abs());
    let horizontal = if y.is_finite() { (curve.eval(y) - x).abs() / (1.0 + x.abs()) } else { f64::INFINITY };
    vertical.min(horizontal)
}
