//! Canonical example models used across the test suites and documentation.

use crate::generators::make_scalar;
use crate::model::{BlockMatrix, MG1Model, ParametricTail};
use crate::tail::TailFamily;
use crate::truncation::li_truncate;

/// `A(-1) = 0.6, A(0) = A(1) = 0.2`: drift -0.4, closed-form stationary
/// distribution `pi(0) = 4/9`, `pi(k) = (10/27) 3^{-(k-1)}`.
pub fn scalar1() -> MG1Model {
    make_scalar(0.6, &[0.2, 0.2], None).expect("preset is well formed")
}

/// Scalar chain with downward mass 0.7 and a rank-one Pareto(3, 1) up-tail of
/// total mass 0.3.
pub fn pareto1() -> MG1Model {
    make_scalar(
        0.7,
        &[],
        Some(ParametricTail {
            family: TailFamily::Pareto { alpha: 3.0, gamma: 1.0 },
            row_scale: vec![0.3],
            col_profile: vec![1.0],
        }),
    )
    .expect("preset is well formed")
}

/// As [`pareto1`] but with shape 2: finite mean, infinite second moment.
pub fn pareto2() -> MG1Model {
    make_scalar(
        0.7,
        &[],
        Some(ParametricTail {
            family: TailFamily::Pareto { alpha: 2.0, gamma: 1.0 },
            row_scale: vec![0.3],
            col_profile: vec![1.0],
        }),
    )
    .expect("preset is well formed")
}

/// [`pareto1`] with its tail folded at level increment 12: finite support,
/// exactly computable tail sums.
pub fn finite_cut_pareto1() -> MG1Model {
    li_truncate(&pareto1(), 12).expect("preset is well formed").model
}

/// Upward-drifting scalar chain (`sigma = +0.8`); not positive recurrent.
pub fn positive_drift() -> MG1Model {
    MG1Model::new(
        1,
        1,
        vec![
            BlockMatrix::from_rows(&[vec![0.1]]).unwrap(),
            BlockMatrix::from_rows(&[vec![0.0]]).unwrap(),
            BlockMatrix::from_rows(&[vec![0.9]]).unwrap(),
        ],
        BlockMatrix::from_rows(&[vec![0.1]]).unwrap(),
        vec![
            BlockMatrix::from_rows(&[vec![0.5]]).unwrap(),
            BlockMatrix::from_rows(&[vec![0.5]]).unwrap(),
        ],
        None,
        None,
    )
    .expect("preset is well formed")
}

/// Scalar chain that only ever moves down: levels past 1 are never occupied
/// in steady state.
pub fn pure_death() -> MG1Model {
    make_scalar(1.0, &[], None).expect("preset is well formed")
}
