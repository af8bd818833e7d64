//! Solver and verification toolkit for M/G/1-type Markov chains.
//!
//! The crate computes stationary distributions of upper block-Hessenberg
//! (M/G/1-type) Markov chains through the matrix-analytic pipeline
//! (G-matrix, boundary kernel, Ramaswami's forward recursion), applies
//! level-increment truncation to make the block sequences finite, and
//! quantifies the truncation error against an independent finite-chain
//! oracle, including the subgeometric rate at which the per-level error
//! decays for heavy-tailed block sequences.
//!
//! Modules:
//! - [`model`]: block-structured transition models and validation.
//! - [`mam`]: the matrix-analytic solver.
//! - [`truncation`]: the level-increment truncation operator and error metrics.
//! - [`asymptotics`]: reference tail distributions and convergence-rate sweeps.
//! - [`oracle`]: brute-force finite-chain machinery for verification.
//! - [`generators`]: seeded model builders.
//! - [`presets`]: the canonical example models.

pub mod asymptotics;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod mam;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod tail;
pub mod tol;
pub mod truncation;

pub use error::{Mg1Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip the
/// binary64 value exactly; used for all CSV output.
pub fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}
