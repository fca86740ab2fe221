//! Two-point zero-mean disintegration of zero-mean laws.
//!
//! Every zero-mean distribution is a mixture of zero-mean laws on two points
//! `{x, r(x, u)}`, where `r` is the reciprocating function built from the
//! curve `G(x) = E[|X|; X between 0 and x]`. This crate computes that
//! disintegration exactly for discrete laws, samples it, uses it for
//! self-normalized tests, compares it against alternative disintegrations,
//! and models reciprocating curves parametrically.

pub mod disintegration;
pub mod estimator;
pub mod invariants;
pub mod io;
pub mod measure;
pub mod modeling;
pub mod numerics;
pub mod optimal;
pub mod rng;
pub mod scalar;
pub mod selfnorm;

pub use measure::{Backend, GQuery, MeasureError, ZeroMeanMeasure};
pub use scalar::{Ext, Rational, Scalar};
