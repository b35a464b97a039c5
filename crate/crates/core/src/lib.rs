//! Numerical laboratory for dynamical localization of random lattice
//! Schrödinger operators `H = −Δ_d + V`.
//!
//! The crate covers disorder generation, operator assembly, exact and
//! Chebyshev time evolution, second moments and their Cesàro means, lattice
//! Green's functions with the geometric resolvent identity, regularity tests
//! for multi-scale analysis, diffusion-exponent estimators, and exact
//! certificate arithmetic for the scale-step lemmas.

pub mod error;
pub mod lattice;
pub mod rng;
pub mod stats;
pub mod disorder;
pub mod operator;
pub mod ensemble;
pub mod chebyshev;
pub mod quadrature;
pub mod banded;
pub mod dynamics;
pub mod green;
pub mod msa;
pub mod estimators;

pub use error::{Error, Result};
