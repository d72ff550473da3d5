//! Desk-scale numerical laboratory for repeated-interaction thermalization.
//!
//! The crate simulates weak system-bath coupling channels on few-qubit
//! systems, assembles their effective KMS-detailed-balance Lindbladians,
//! and measures fixed-point bias, spectral gaps, and mixing times with
//! dense superoperator linear algebra.
//!
//! Layout:
//! - [`operators`]: dense complex operator algebra and vectorization
//! - [`quad`]: quadrature rules shared by the channel and the generator
//! - [`model`]: Hamiltonian presets, Gibbs states, Bohr decompositions
//! - [`bath`]: exact simulation of the repeated-interaction channel
//! - [`lindblad`]: the effective Lindbladian and its KMS decomposition
//! - [`kms`]: similarity transform, spectral gap, weighted metrics
//! - [`timedist`]: the random interaction-time law and its corrections
//! - [`experiments`]: fixed points, scaling scans, mixing measurement

pub mod bath;
pub mod error;
pub mod experiments;
pub mod kms;
pub mod lindblad;
pub mod model;
pub mod operators;
pub mod quad;
pub mod timedist;

pub use error::{GdlError, Result};
