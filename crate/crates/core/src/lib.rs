//! Exact dynamics of piecewise affine contractions.
//!
//! The crate follows the pipeline
//! `map → orbit → partition → counting`, plus IFS constructions and a
//! parameter sweep over the family `f + δ (mod 1)`. Everything is generic
//! over [`Scalar`]; certified results are always computed in [`Rational`].

pub mod counting;
pub mod error;
pub mod fixtures;
pub mod ifs;
pub mod io;
pub mod map;
pub mod orbit;
pub mod partition;
pub mod scalar;
pub mod sweep;

pub use error::{Error, Result};
pub use map::{
    compose_word, conjugacy_offset, conjugate_shift, generic_position_check, AffineBranch, Domain, ModOneFamily,
    PiecewiseContraction,
};
pub use scalar::{format_rational, parse_rational, ratio, ExactScalar, Rational, Scalar};

/// Exact map, the type every certificate is computed in.
pub type ExactMap = PiecewiseContraction<Rational>;
/// Float projection used for fast scans.
pub type FloatMap = PiecewiseContraction<f64>;
pub type ExactBranch = AffineBranch<Rational>;
pub type ExactFamily = ModOneFamily<Rational>;
