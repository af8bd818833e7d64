//! Level-increment truncation: caps the per-step upward level jump at `N` by
//! folding all block mass past `N` into the `N`-th block, which keeps every
//! row exactly stochastic, then measures how far the truncated chain's
//! stationary distribution sits from a reference solution.

use serde::Serialize;

use crate::error::{Mg1Error, Result};
use crate::linalg;
use crate::mam::{self, StationarySolution};
use crate::model::{BlockMatrix, MG1Model};

/// A model with level increments capped at `n`.
#[derive(Clone, Debug)]
pub struct TruncatedModel {
    pub n: usize,
    pub model: MG1Model,
}

/// Caps level increments at `n >= 1`. The resulting model has purely explicit
/// blocks; when the base support already ends at or before `n` the result
/// equals the base model.
pub fn li_truncate(model: &MG1Model, n: usize) -> Result<TruncatedModel> {
    assert!(n >= 1, "truncation level must be at least 1");
    let n_i = n as i64;

    let mut a_blocks: Vec<BlockMatrix> =
        (-1..n_i).map(|k| model.block_a(k)).collect();
    let fold_a = model.tail_a(n_i - 1);
    if fold_a.max_abs() > 0.0 {
        a_blocks.push(fold_a);
    }

    let mut b_blocks: Vec<BlockMatrix> = (0..n_i).map(|k| model.block_b(k)).collect();
    let fold_b = model.tail_b((n_i - 1).max(0));
    if n >= 1 && fold_b.max_abs() > 0.0 {
        b_blocks.push(fold_b);
    }

    // Trim trailing zero blocks so truncation past support is the identity.
    while a_blocks.len() > 1 && a_blocks.last().unwrap().max_abs() == 0.0 {
        a_blocks.pop();
    }
    while b_blocks.len() > 1 && b_blocks.last().unwrap().max_abs() == 0.0 {
        b_blocks.pop();
    }

    let model = MG1Model::new(
        model.m0(),
        model.m1(),
        a_blocks,
        model.block_b(-1),
        b_blocks,
        None,
        None,
    )?;
    Ok(TruncatedModel { n, model })
}

/// Stationary distribution of the truncated model.
pub fn pi_truncated(model: &MG1Model, n: usize, horizon: usize) -> Result<StationarySolution> {
    let truncated = li_truncate(model, n)?;
    let sigma = truncated.model.drift()?;
    if sigma >= 0.0 {
        return Err(Mg1Error::DriftNonNegative { sigma });
    }
    mam::ramaswami_pi(&truncated.model, horizon)
}

/// Per-level and aggregate distances between two stationary solutions.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorMetrics {
    pub k_max: usize,
    /// `|pi_n(k) - pi_ref(k)| e` per level.
    pub level_errors: Vec<f64>,
    /// `(pi_n(k) - pi_ref(k)) e` per level.
    pub signed_level_diff: Vec<f64>,
    /// l1 of the level difference divided by the reference level mass.
    pub relative_tv: Vec<f64>,
    /// Sum of level errors plus both beyond-horizon mass bounds.
    pub tv_total: f64,
}

/// Distances between a truncated solution `pi_n` and a reference `pi_ref`
/// over levels `0..=k_max`.
pub fn error_metrics(
    pi_ref: &StationarySolution,
    pi_n: &StationarySolution,
    k_max: usize,
) -> Result<ErrorMetrics> {
    for s in [pi_ref, pi_n] {
        if s.horizon < k_max {
            return Err(Mg1Error::HorizonTooShort { need: k_max, have: s.horizon });
        }
    }
    let mut level_errors = Vec::with_capacity(k_max + 1);
    let mut signed = Vec::with_capacity(k_max + 1);
    let mut relative = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let a = pi_n.level(k);
        let b = pi_ref.level(k);
        if a.len() != b.len() {
            return Err(Mg1Error::DimensionMismatch(format!("level {k} phase counts differ")));
        }
        let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        let s: f64 = a.iter().zip(b).map(|(x, y)| x - y).sum();
        level_errors.push(l1);
        signed.push(s);
        let ref_mass = linalg::sum(b);
        relative.push(if l1 == 0.0 { 0.0 } else { l1 / ref_mass });
    }
    let tv_total = level_errors.iter().sum::<f64>()
        + pi_ref.tail_mass_above(k_max)
        + pi_n.tail_mass_above(k_max);
    Ok(ErrorMetrics { k_max, level_errors, signed_level_diff: signed, relative_tv: relative, tv_total })
}
