//! Supermode analysis of synchronously pumped optical parametric oscillators
//! below threshold: coupling matrix, eigen-decomposition, oscillation
//! threshold and quadrature noise spectra.

// `!(x > 0.0)` is how inputs reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coupling;
pub mod dispersion;
pub mod emit;
pub mod run;
pub mod spectral;
pub mod squeezing;
pub mod threshold;
pub mod units;
