//! Numerical machinery for quantum Hamiltonians near exceptional-point
//! singularities: finite-dimensional models with Jordan-chain
//! canonicalization and perturbation unfolding, and the truncated-basis
//! analysis of the imaginary cubic oscillator with chain-basis construction
//! and first-order perturbation recovery.

pub mod error;
mod lapack;
pub mod epn_models;
pub mod epn_perturbation;
pub mod ic_spectral;
pub mod iep_basis;
pub mod iep_perturbation;
pub mod numerics;
pub mod stats;

pub use error::{Error, Result};
