//! Shared numerical tolerances.
//!
//! Every threshold used across the crate is defined here rather than inlined
//! at call sites, so the precision contract of each layer is in one place.

/// Stochasticity defect allowed on row sums of transition blocks.
pub const EPS_STOCH: f64 = 1e-10;

/// Remainder bound for truncated infinite series (tail sums, G/R series).
pub const EPS_TAIL: f64 = 1e-12;

/// Residual allowed on direct linear solves (stationary vectors, inverses).
pub const EPS_SOLVE: f64 = 1e-12;

/// Residual allowed on structural identities checked on oracle chains,
/// e.g. the deviation-matrix identity and taboo-visit counting identity.
pub const EPS_CHECK: f64 = 1e-9;

/// Mass unaccounted for by a finite-horizon stationary solution.
pub const EPS_MASS: f64 = 1e-6;

/// Hard cap on terms summed when bounding series remainders numerically.
pub const SERIES_ITER_CAP: usize = 10_000_000;

/// Default fixed-point tolerance for the G-matrix iteration.
pub const G_TOL: f64 = 1e-13;

/// Default iteration cap for the G-matrix fixed-point iteration.
pub const G_MAX_ITER: usize = 50_000;

/// A stochastic matrix whose spectral radius estimate exceeds this is
/// treated as defective (a level the chain cannot leave).
pub const PHI_RADIUS_LIMIT: f64 = 1.0 - 1e-10;
