//! Matrix-analytic core: the first-passage G-matrix, the boundary matrices
//! and the stationary distribution computed level by level through
//! Ramaswami's recursion.
//!
//! Infinite series over the block sequences are evaluated to the crate-wide
//! tail tolerance: blocks past `series_cutoff_*` carry less row mass than
//! `EPS_TAIL`, and since every factor multiplying them is substochastic the
//! discarded series remainder is bounded by that same mass.

use serde::Serialize;

use crate::error::{Mg1Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::MG1Model;
use crate::tol::{EPS_TAIL, G_MAX_ITER, G_TOL, PHI_RADIUS_LIMIT};

/// Outcome of the G-matrix fixed-point iteration.
#[derive(Clone, Debug)]
pub struct GMatrixResult {
    /// First-passage phase matrix to the level below (stochastic when the
    /// drift is negative).
    pub matrix: Matrix,
    /// Stationary row vector of `matrix`, when it exists.
    pub stationary: Option<Vec<f64>>,
    pub iterations: usize,
    /// Fixed-point defect measured after convergence.
    pub residual: f64,
    /// Smallest elementwise step increment seen across all iterations;
    /// nonnegative iff the iteration was monotone from below.
    pub min_increment: f64,
}

/// Boundary quantities: the within-level return map at level 1, the censored
/// boundary kernel, and its stationary vector.
#[derive(Clone, Debug)]
pub struct BoundaryResult {
    pub phi0: Matrix,
    pub k_matrix: Matrix,
    pub kappa: Vec<f64>,
}

/// Stationary distribution computed to a finite level horizon.
#[derive(Clone, Debug, Serialize)]
pub struct StationarySolution {
    /// `pi_blocks[k]` is the stationary subvector of level `k`.
    pub pi_blocks: Vec<Vec<f64>>,
    pub horizon: usize,
    /// Total mass on levels `0..=horizon`.
    pub mass: f64,
    /// Mass unaccounted for past the horizon.
    pub tail_mass_bound: f64,
    /// Aggregate of all levels past 0.
    pub pi_bar0: Vec<f64>,
    /// Worst per-level balance defect of the spot check `pi P = pi`.
    pub residual_check: f64,
    /// Drift of the model that produced this solution.
    pub sigma: f64,
}

impl StationarySolution {
    pub fn level(&self, k: usize) -> &[f64] {
        &self.pi_blocks[k]
    }

    pub fn level_mass(&self, k: usize) -> f64 {
        linalg::sum(&self.pi_blocks[k])
    }

    /// Mass on levels `0..=upto`.
    pub fn partial_mass(&self, upto: usize) -> f64 {
        self.pi_blocks[..=upto.min(self.horizon)].iter().map(|b| linalg::sum(b)).sum()
    }

    /// Mass strictly above `k`, by complement.
    pub fn tail_mass_above(&self, k: usize) -> f64 {
        (1.0 - self.partial_mass(k)).max(0.0)
    }
}

/// `sum_i coeffs[i] * g^i` by Horner evaluation from the highest index, so
/// small high-order terms accumulate first.
fn matrix_poly(coeffs: &[Matrix], g: &Matrix) -> Matrix {
    let n = coeffs.len();
    assert!(n > 0);
    let mut acc = coeffs[n - 1].clone();
    let mut scratch = Matrix::zeros(acc.rows(), g.cols());
    for c in coeffs[..n - 1].iter().rev() {
        acc.matmul_into(g, &mut scratch);
        scratch.add_assign(c);
        std::mem::swap(&mut acc, &mut scratch);
    }
    acc
}

/// Natural fixed-point iteration for the G-matrix, refusing nonnegative
/// drift unless `allow_nonneg_drift` is set (the fixed point is then only
/// substochastic).
pub fn compute_g_with(
    model: &MG1Model,
    tol: f64,
    max_iter: usize,
    allow_nonneg_drift: bool,
) -> Result<GMatrixResult> {
    let sigma = model.drift()?;
    if sigma >= 0.0 && !allow_nonneg_drift {
        return Err(Mg1Error::DriftNonNegative { sigma });
    }
    let cutoff = model.series_cutoff_a()?;
    // coeffs[i] = A(i - 1), so the series is a plain polynomial in G.
    let coeffs = model.a_series(cutoff);

    let m1 = model.m1();
    let mut g = Matrix::zeros(m1, m1);
    let mut min_increment = f64::INFINITY;
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    for it in 1..=max_iter {
        let g_new = matrix_poly(&coeffs, &g);
        let mut min_step = f64::INFINITY;
        let mut max_step: f64 = 0.0;
        for (new, old) in g_new.data().iter().zip(g.data()) {
            let d = new - old;
            min_step = min_step.min(d);
            max_step = max_step.max(d.abs());
        }
        min_increment = min_increment.min(min_step);
        g = g_new;
        iterations = it;
        last_delta = max_step;
        if max_step < tol {
            break;
        }
    }
    if last_delta >= tol {
        return Err(Mg1Error::NotConverged { max_iter, last_delta });
    }

    let residual = g.sub(&matrix_poly(&coeffs, &g)).inf_norm();
    let stationary = if sigma < 0.0 {
        Some(linalg::stationary_row_vector(&g, "stationary vector of G")?)
    } else {
        linalg::stationary_row_vector(&g, "stationary vector of G").ok()
    };
    Ok(GMatrixResult { matrix: g, stationary, iterations, residual, min_increment })
}

pub fn compute_g(model: &MG1Model, tol: f64, max_iter: usize) -> Result<GMatrixResult> {
    compute_g_with(model, tol, max_iter, false)
}

/// Within-level return map `phi0`, censored boundary kernel and its
/// stationary vector.
pub fn boundary_matrices(model: &MG1Model, g: &GMatrixResult) -> Result<BoundaryResult> {
    let cutoff_a = model.series_cutoff_a()?;
    let cutoff_b = model.series_cutoff_b()?;
    let a_coeffs = model.a_series(cutoff_a);

    // phi0 = sum_{m >= 0} A(m) G^m; coefficient i of the polynomial is A(i).
    let phi0 = matrix_poly(&a_coeffs[1..], &g.matrix);
    let radius = linalg::spectral_radius_nonneg(&phi0, 10_000, 1e-13);
    if radius >= PHI_RADIUS_LIMIT {
        return Err(Mg1Error::SingularMatrix(format!(
            "within-level return map has spectral radius {radius:.12}; \
             the chain is trapped inside a level"
        )));
    }
    let m1 = model.m1();
    let i_minus_phi0 = Matrix::identity(m1).sub(&phi0);
    let lu = linalg::lu_factor(&i_minus_phi0, "I - phi0")?;

    // K = B(0) + (sum_{m >= 1} B(m) G^(m-1)) (I - phi0)^(-1) B(-1).
    let b_coeffs = model.b_series(cutoff_b.max(1));
    let w_b1 = matrix_poly(&b_coeffs, &g.matrix);
    let descent = lu.solve_mat(model.block_b(-1).mat());
    let k_matrix = model.block_b(0).mat().add(&w_b1.matmul(&descent));
    let kappa = linalg::stationary_row_vector(&k_matrix, "stationary vector of K")?;

    Ok(BoundaryResult { phi0, k_matrix, kappa })
}

/// Level-shift matrices `R(k)` and `R_0(k)` for `k = 1..=k_max`, returned as
/// pairs indexed from `k = 1`.
pub fn r_matrices(
    model: &MG1Model,
    g: &Matrix,
    phi0: &Matrix,
    k_max: usize,
) -> Result<Vec<(Matrix, Matrix)>> {
    let m0 = model.m0();
    let m1 = model.m1();
    let inv = linalg::lu_factor(&Matrix::identity(m1).sub(phi0), "I - phi0")?.inverse();

    let mut out: Vec<(Matrix, Matrix)> =
        (0..k_max).map(|_| (Matrix::zeros(m1, m1), Matrix::zeros(m0, m1))).collect();

    // Downward recursions W(k) = block(k) + W(k+1) G, starting past support.
    let cutoff_a = model.series_cutoff_a()?;
    let mut w = Matrix::zeros(m1, m1);
    let mut scratch = Matrix::zeros(m1, m1);
    for k in (1..=cutoff_a).rev() {
        w.matmul_into(g, &mut scratch);
        scratch.add_assign(model.block_a(k).mat());
        std::mem::swap(&mut w, &mut scratch);
        if (k as usize) <= k_max {
            out[k as usize - 1].0 = w.matmul(&inv);
        }
    }

    let cutoff_b = model.series_cutoff_b()?.max(1);
    let mut wb = Matrix::zeros(m0, m1);
    let mut scratch_b = Matrix::zeros(m0, m1);
    for k in (1..=cutoff_b).rev() {
        wb.matmul_into(g, &mut scratch_b);
        scratch_b.add_assign(model.block_b(k).mat());
        std::mem::swap(&mut wb, &mut scratch_b);
        if (k as usize) <= k_max {
            out[k as usize - 1].1 = wb.matmul(&inv);
        }
    }
    Ok(out)
}

/// Boundary stationary subvector via the normalized censored solution.
pub fn pi_zero(model: &MG1Model, g: &GMatrixResult, boundary: &BoundaryResult) -> Result<Vec<f64>> {
    let a = model.a_sum();
    let varpi = linalg::stationary_row_vector(&a, "stationary phase mix of A")?;
    let m_bar_a = model.m_bar_a()?;
    let m_bar_b = model.m_bar_b()?;
    let sigma = linalg::dot(&varpi, &m_bar_a);
    if sigma >= 0.0 {
        return Err(Mg1Error::DriftNonNegative { sigma });
    }

    let m1 = model.m1();
    // sum_{m >= 1} B(m) (I - G^m) = tail_B(0) - (sum_{m >= 1} B(m) G^(m-1)) G.
    let cutoff_b = model.series_cutoff_b()?.max(1);
    let b_coeffs = model.b_series(cutoff_b);
    let w_b1 = matrix_poly(&b_coeffs, &g.matrix);
    let b_diff = model.tail_b(0).mat().sub(&w_b1.matmul(&g.matrix));

    // (I - A + e varpi)^(-1) m_bar_a
    let shifted = Matrix::identity(m1).sub(&a).add(&Matrix::outer(&vec![1.0; m1], &varpi));
    let x = linalg::solve(&shifted, &m_bar_a, "I - A + e varpi")?;

    let braces: Vec<f64> =
        m_bar_b.iter().zip(b_diff.matvec(&x)).map(|(b, c)| b + c).collect();
    let norm = 1.0 + linalg::dot(&boundary.kappa, &braces) / (-sigma);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Mg1Error::SingularMatrix(format!(
            "boundary normalization constant {norm}"
        )));
    }
    let pi0: Vec<f64> = boundary.kappa.iter().map(|k| k / norm).collect();
    if pi0.iter().any(|&v| v <= 0.0) {
        return Err(Mg1Error::SingularMatrix("boundary subvector not positive".into()));
    }
    Ok(pi0)
}

/// Precomputed solver state shared by the stationary recursion and the
/// verification routines.
pub struct MamCore {
    pub g: GMatrixResult,
    pub boundary: BoundaryResult,
    pub a_sum: Matrix,
    pub varpi: Vec<f64>,
    pub sigma: f64,
    pub m_bar_a: Vec<f64>,
    pub m_bar_b: Vec<f64>,
}

impl MamCore {
    pub fn build(model: &MG1Model) -> Result<Self> {
        let g = compute_g(model, G_TOL, G_MAX_ITER)?;
        let boundary = boundary_matrices(model, &g)?;
        let a_sum = model.a_sum();
        let varpi = linalg::stationary_row_vector(&a_sum, "stationary phase mix of A")?;
        let m_bar_a = model.m_bar_a()?;
        let m_bar_b = model.m_bar_b()?;
        let sigma = linalg::dot(&varpi, &m_bar_a);
        Ok(MamCore { g, boundary, a_sum, varpi, sigma, m_bar_a, m_bar_b })
    }

    /// `g` as a plain row vector; present whenever the drift is negative.
    pub fn g_stationary(&self) -> &[f64] {
        self.g.stationary.as_deref().expect("stationary vector of G exists when sigma < 0")
    }
}

/// Stationary distribution on levels `0..=horizon` by forward recursion.
pub fn ramaswami_pi(model: &MG1Model, horizon: usize) -> Result<StationarySolution> {
    let core = MamCore::build(model)?;
    ramaswami_pi_with_core(model, &core, horizon)
}

pub fn ramaswami_pi_with_core(
    model: &MG1Model,
    core: &MamCore,
    horizon: usize,
) -> Result<StationarySolution> {
    let pi0 = pi_zero(model, &core.g, &core.boundary)?;
    let shifts = r_matrices(model, &core.g.matrix, &core.boundary.phi0, horizon)?;

    let mut pi_blocks: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    pi_blocks.push(pi0);
    for k in 1..=horizon {
        let mut level = shifts[k - 1].1.vecmat(&pi_blocks[0]);
        for l in 1..k {
            let r = &shifts[k - l - 1].0;
            let contrib = r.vecmat(&pi_blocks[l]);
            for (a, b) in level.iter_mut().zip(contrib) {
                *a += b;
            }
        }
        pi_blocks.push(level);
    }

    let mass: f64 = pi_blocks.iter().map(|b| linalg::sum(b)).sum();
    let mut pi_bar0 = vec![0.0; model.m1()];
    for block in &pi_blocks[1..] {
        for (a, b) in pi_bar0.iter_mut().zip(block) {
            *a += b;
        }
    }

    let residual_check = balance_residual(model, &pi_blocks);

    Ok(StationarySolution {
        horizon,
        mass,
        tail_mass_bound: (1.0 - mass).max(0.0) + EPS_TAIL,
        pi_bar0,
        residual_check,
        sigma: core.sigma,
        pi_blocks,
    })
}

/// Spot check of global balance on levels `0..=min(horizon - 1, 50)`.
fn balance_residual(model: &MG1Model, pi: &[Vec<f64>]) -> f64 {
    if pi.len() < 2 {
        return 0.0;
    }
    let top = (pi.len() - 2).min(50);
    let mut worst: f64 = 0.0;
    for k in 0..=top {
        let mut flow = model.block_b(k as i64).vecmat(&pi[0]);
        if k == 0 {
            let down = model.block_b(-1).vecmat(&pi[1]);
            for (a, b) in flow.iter_mut().zip(down) {
                *a += b;
            }
        } else {
            for l in 1..=(k + 1).min(pi.len() - 1) {
                let contrib = model.block_a(k as i64 - l as i64).vecmat(&pi[l]);
                for (a, b) in flow.iter_mut().zip(contrib) {
                    *a += b;
                }
            }
        }
        let defect: f64 =
            flow.iter().zip(&pi[k]).map(|(a, b)| (a - b).abs()).sum();
        worst = worst.max(defect);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{pareto1, scalar1};
    use crate::tol::{G_MAX_ITER, G_TOL};

    #[test]
    fn scalar1_g_is_one() {
        let m = scalar1();
        let g = compute_g(&m, G_TOL, G_MAX_ITER).unwrap();
        assert!((g.matrix.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(g.residual < 1e-12);
        assert!(g.min_increment >= 0.0, "iteration not monotone");
        assert_eq!(g.stationary.as_deref().unwrap(), &[1.0]);
        // Fixed-point identity at the known solution.
        let fp: f64 = 0.6 + 0.2 * 1.0 + 0.2 * 1.0;
        assert!((fp - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pareto1_g_is_one() {
        let m = pareto1();
        let g = compute_g(&m, G_TOL, G_MAX_ITER).unwrap();
        assert!((g.matrix.get(0, 0) - 1.0).abs() < 1e-11);
        assert!(g.residual < 1e-12);
        assert!(g.min_increment >= 0.0);
    }

    #[test]
    fn scalar1_boundary_quantities() {
        let m = scalar1();
        let g = compute_g(&m, G_TOL, G_MAX_ITER).unwrap();
        let b = boundary_matrices(&m, &g).unwrap();
        assert!((b.phi0.get(0, 0) - 0.4).abs() < 1e-12);
        assert!((b.k_matrix.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((b.kappa[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar1_r_matrices() {
        let m = scalar1();
        let g = compute_g(&m, G_TOL, G_MAX_ITER).unwrap();
        let b = boundary_matrices(&m, &g).unwrap();
        let r = r_matrices(&m, &g.matrix, &b.phi0, 2).unwrap();
        assert!((r[0].0.get(0, 0) - 1.0 / 3.0).abs() < 1e-12); // R(1)
        assert!((r[0].1.get(0, 0) - 5.0 / 6.0).abs() < 1e-12); // R0(1)
        assert_eq!(r[1].0.get(0, 0), 0.0); // R(2)
        assert_eq!(r[1].1.get(0, 0), 0.0); // R0(2)
    }

    #[test]
    fn scalar1_pi_zero_and_recursion() {
        let m = scalar1();
        let sol = ramaswami_pi(&m, 6).unwrap();
        assert!((sol.level(0)[0] - 4.0 / 9.0).abs() < 1e-13);
        assert!((sol.level(1)[0] - 10.0 / 27.0).abs() < 1e-13);
        assert!((sol.level(2)[0] - 10.0 / 81.0).abs() < 1e-13);
        for k in 2..=6 {
            let want = (10.0 / 27.0) * (1.0f64 / 3.0).powi(k as i32 - 1);
            assert!((sol.level_mass(k) - want).abs() < 1e-13);
        }
        assert!(sol.residual_check < 1e-12);
    }

    #[test]
    fn scalar1_horizon_zero() {
        let sol = ramaswami_pi(&scalar1(), 0).unwrap();
        assert_eq!(sol.pi_blocks.len(), 1);
        assert!((sol.mass - 4.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn scalar1_mass_converges() {
        let sol = ramaswami_pi(&scalar1(), 200).unwrap();
        assert!((sol.mass - 1.0).abs() < 1e-6);
        assert!((sol.pi_bar0[0] - 5.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn positive_drift_is_refused_then_overridable() {
        let m = crate::presets::positive_drift();
        assert!(matches!(
            compute_g(&m, G_TOL, G_MAX_ITER),
            Err(Mg1Error::DriftNonNegative { .. })
        ));
        let g = compute_g_with(&m, G_TOL, G_MAX_ITER, true).unwrap();
        // g = 0.1 + 0.9 g^2 has minimal root 1/9; substochastic.
        assert!((g.matrix.get(0, 0) - 1.0 / 9.0).abs() < 1e-10);
        assert!(g.matrix.row_sums().iter().all(|&s| s <= 1.0 + 1e-12));
        assert!(g.min_increment >= 0.0);
    }

    #[test]
    fn pure_death_chain() {
        // Downward mass 1: levels 2+ never visited.
        let m = crate::presets::pure_death();
        let sol = ramaswami_pi(&m, 5).unwrap();
        assert!((sol.sigma + 1.0).abs() < 1e-14);
        assert!((sol.level(0)[0] - 2.0 / 3.0).abs() < 1e-13);
        assert!((sol.level(1)[0] - 1.0 / 3.0).abs() < 1e-13);
        for k in 2..=5 {
            assert_eq!(sol.level_mass(k), 0.0);
        }
    }

    #[test]
    fn pareto1_mass_and_positivity() {
        let sol = ramaswami_pi(&pareto1(), 400).unwrap();
        assert!(sol.mass > 0.999 && sol.mass <= 1.0 + 1e-12);
        assert!(sol.level(0)[0] > 0.0);
        assert!(sol.residual_check < 1e-10, "residual {}", sol.residual_check);
    }
}
