//! Renewal-reward fluctuation processes `Q(t) = S(t) + μ N(μt) − 2μt` built
//! from partial sums of weakly or strongly dependent sequences, with their
//! limit laws, iterated-logarithm envelopes and Monte Carlo verification.

// Parameter checks are written `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbm;
pub mod montecarlo;
pub mod processes;
pub mod quadrature;
pub mod registry;
pub mod sequences;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
