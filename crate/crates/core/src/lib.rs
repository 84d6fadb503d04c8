//! Spectral correlation measures for finite joint distributions.
//!
//! The crate computes the singular values of the normalized joint matrix
//! `P_X^{-1/2} P_XY P_Y^{-1/2}`, checks the spectral data-processing
//! inequality along Markov chains, derives single-letter necessary conditions
//! for n-letter chains `X1 - U^n - V^n - X2`, and evaluates the resulting
//! outer bounds for distributed source coding and for multiple-access
//! channels with correlated sources. Brute-force encoder search in
//! [`oracle`] provides ground truth at small scale.

pub mod error;
pub mod linalg;
pub mod prob;
pub mod dpi;
pub mod spectral;
pub mod asymptotic;
pub mod binary;
pub mod regions;
pub mod io;
pub mod oracle;

pub use error::{Error, Result};
