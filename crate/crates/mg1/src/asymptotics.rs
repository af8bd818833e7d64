//! Reference tail distributions, their class probes (long-tailed,
//! subexponential), the tail constants of the block sequences relative to a
//! reference distribution, the steady-state level-increment distribution, and
//! the truncation-error convergence sweep that ties them together.

use rayon::prelude::*;

use crate::error::{Mg1Error, Result};
use crate::linalg;
use crate::mam::StationarySolution;
use crate::model::MG1Model;
use crate::tail::TailFamily;
use crate::tol::EPS_MASS;
use crate::truncation::pi_truncated;

/// A reference distribution on the nonnegative integers: a parametric family
/// or an explicit survival-function table (zero past the table).
#[derive(Clone, Debug)]
pub enum TailDistribution {
    Family(TailFamily),
    Empirical { sf: Vec<f64> },
}

impl TailDistribution {
    pub fn pareto(alpha: f64, gamma: f64) -> Self {
        TailDistribution::Family(TailFamily::Pareto { alpha, gamma })
    }

    pub fn weibull(lambda: f64, alpha: f64) -> Self {
        TailDistribution::Family(TailFamily::Weibull { lambda, alpha })
    }

    pub fn geometric(rho: f64) -> Self {
        TailDistribution::Family(TailFamily::Geometric { rho })
    }

    /// Survival function, `sf(-1) = 1`.
    pub fn sf(&self, k: i64) -> f64 {
        assert!(k >= -1);
        match self {
            TailDistribution::Family(f) => f.sf(k),
            TailDistribution::Empirical { sf } => {
                if k < 0 {
                    1.0
                } else {
                    sf.get(k as usize).copied().unwrap_or(0.0)
                }
            }
        }
    }

    pub fn pmf(&self, k: i64) -> f64 {
        assert!(k >= 0);
        self.sf(k - 1) - self.sf(k)
    }
}

/// Survival value `sf(k)`.
pub fn tail_value(f: &TailDistribution, k: i64) -> f64 {
    f.sf(k)
}

/// Shift-invariance probe for the long-tailed property.
#[derive(Clone, Debug)]
pub struct LongTailProbe {
    pub n_shift: i64,
    /// `(k, sf(k + n) / sf(k))` along the probe grid.
    pub rows: Vec<(i64, f64)>,
    /// Final ratio within 1e-2 of one.
    pub classified_long_tailed: bool,
}

pub fn is_long_tailed_numeric(f: &TailDistribution, n_shift: i64, k_probe: &[i64]) -> LongTailProbe {
    assert!(n_shift >= 0);
    let rows: Vec<(i64, f64)> = k_probe
        .iter()
        .map(|&k| {
            let denom = f.sf(k);
            let ratio = if denom > 0.0 { f.sf(k + n_shift) / denom } else { f64::NAN };
            (k, ratio)
        })
        .collect();
    let classified = rows
        .last()
        .map(|&(_, r)| r.is_finite() && (r - 1.0).abs() < 1e-2)
        .unwrap_or(false);
    LongTailProbe { n_shift, rows, classified_long_tailed: classified }
}

/// Decay-rate probe `-ln sf(k) / k`; tends to zero exactly for subgeometric
/// tails and to a positive constant for geometric ones.
pub fn subgeometric_log_rate(f: &TailDistribution, k_probe: &[i64]) -> Vec<(i64, f64)> {
    k_probe
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| (k, -f.sf(k).ln() / k as f64))
        .collect()
}

/// Ratio of the two-fold convolution tail to the tail, for `k = 0..=k_max`:
/// tends to 2 exactly for subexponential distributions.
///
/// The convolution tail is accumulated as
/// `sf2(k) = sf(k) + sum_{i<=k} pmf(i) sf(k - i)`, which keeps all terms
/// positive. Quadratic in `k_max`.
pub fn subexponential_ratio(f: &TailDistribution, k_max: usize) -> Result<Vec<f64>> {
    if k_max > 100_000 {
        return Err(Mg1Error::InvalidTail("probe capped at k_max = 1e5 (quadratic cost)".into()));
    }
    let sf: Vec<f64> = (0..=k_max as i64).map(|k| f.sf(k)).collect();
    if let Some(k) = sf.iter().position(|&v| v <= 0.0) {
        return Err(Mg1Error::InvalidTail(format!("survival function vanishes at k = {k}")));
    }
    let pmf: Vec<f64> = (0..=k_max as i64).map(|k| f.pmf(k)).collect();
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut conv = sf[k];
        for i in 0..=k {
            conv += pmf[i] * sf[k - i];
        }
        out.push(conv / sf[k]);
    }
    Ok(out)
}

/// Numerically estimated tail constants of the block sequences against a
/// reference distribution.
#[derive(Clone, Debug)]
pub struct CEstimate {
    pub c_a: Vec<f64>,
    pub c_b: Vec<f64>,
    /// `(n, max ratio entry over both sequences)` along the grid.
    pub table: Vec<(i64, f64)>,
    /// Relative change of the ratio across the last two grid points.
    pub residual: f64,
    /// Closed-form shortcut used (matched Pareto families).
    pub analytic: bool,
    /// Both constants vanish identically.
    pub both_zero: bool,
    /// Ratios trend to zero: the reference is heavier than the block tails.
    pub vanishing: bool,
}

fn matched_pareto_constant(model_tail: &crate::model::ParametricTail, f: &TailFamily) -> Option<Vec<f64>> {
    if let (TailFamily::Pareto { alpha: am, gamma: gm }, TailFamily::Pareto { alpha: ar, gamma: gr }) =
        (model_tail.family, *f)
    {
        if (am - 1.0 - ar).abs() < 1e-9 {
            let factor = gm.powf(am) / ((am - 1.0) * gr.powf(ar));
            return Some(model_tail.row_scale.iter().map(|&s| s * factor).collect());
        }
    }
    None
}

/// Estimates the limits of the double-tail row masses over the reference
/// survival function along `n_grid`, with a closed-form shortcut when both
/// parametric tails are Pareto matched to the reference.
pub fn estimate_c_vectors(
    model: &MG1Model,
    f: &TailDistribution,
    n_grid: &[i64],
) -> Result<CEstimate> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Mg1Error::InvalidModel("need a strictly increasing grid of at least 2".into()));
    }

    // Closed-form route.
    if let TailDistribution::Family(fam) = f {
        let a_side = match model.a_tail() {
            None => Some(vec![0.0; model.m1()]),
            Some(t) => matched_pareto_constant(t, fam),
        };
        let b_side = match model.b_tail() {
            None => Some(vec![0.0; model.m0()]),
            Some(t) => matched_pareto_constant(t, fam),
        };
        if let (Some(c_a), Some(c_b)) = (a_side, b_side) {
            let both_zero = c_a.iter().chain(&c_b).all(|&v| v == 0.0);
            return Ok(CEstimate {
                c_a,
                c_b,
                table: Vec::new(),
                residual: 0.0,
                analytic: true,
                both_zero,
                vanishing: false,
            });
        }
    }

    let mut table = Vec::with_capacity(n_grid.len());
    let mut last_ra: Vec<f64> = vec![0.0; model.m1()];
    let mut last_rb: Vec<f64> = vec![0.0; model.m0()];
    for &n in n_grid {
        let sf = f.sf(n);
        if sf <= 0.0 {
            return Err(Mg1Error::InvalidTail(format!("reference survival vanishes at {n}")));
        }
        last_ra = model.double_tail_a(n)?.row_sums().iter().map(|v| v / sf).collect();
        last_rb = model.double_tail_b(n)?.row_sums().iter().map(|v| v / sf).collect();
        let s = last_ra.iter().chain(&last_rb).cloned().fold(0.0, f64::max);
        table.push((n, s));
    }

    let s_last = table[table.len() - 1].1;
    let s_prev = table[table.len() - 2].1;
    if s_last > 1e6 {
        return Err(Mg1Error::Divergent(format!("ratio reached {s_last:.3e}")));
    }
    if s_prev > 0.0 && s_last > 1e-9 && s_last / s_prev > 1.25 {
        return Err(Mg1Error::Divergent(format!(
            "ratio grows {:.3}x per grid step",
            s_last / s_prev
        )));
    }
    let both_zero = s_last <= 1e-12;
    let vanishing = !both_zero && s_prev > 0.0 && s_last / s_prev < 0.8;
    let residual = if s_prev > 0.0 { (s_last / s_prev - 1.0).abs() } else { 0.0 };
    Ok(CEstimate {
        c_a: last_ra,
        c_b: last_rb,
        table,
        residual,
        analytic: false,
        both_zero,
        vanishing,
    })
}

/// Distribution of the nonnegative steady-state level increment and its
/// integrated-tail companion.
#[derive(Clone, Debug)]
pub struct NLSDistribution {
    /// Cumulative distribution values on `0..=horizon`.
    pub d: Vec<f64>,
    /// Integrated-tail cumulative values on `0..=horizon`.
    pub d_i: Vec<f64>,
    /// Mean nonnegative increment; the integrated-tail normalizer.
    pub mean_increment: f64,
}

/// Builds the steady-state increment distribution from the model blocks and
/// the boundary/tail masses of a stationary solution.
pub fn nls_distribution(
    model: &MG1Model,
    pi: &StationarySolution,
    horizon: usize,
) -> Result<NLSDistribution> {
    if 1.0 - pi.mass >= EPS_MASS {
        return Err(Mg1Error::HorizonTooShort { need: 2 * pi.horizon.max(1), have: pi.horizon });
    }
    let pi0 = pi.level(0);
    let pi_bar0 = &pi.pi_bar0;
    let m_bar_b = model.m_bar_b()?;
    let m_bar_a_plus = model.m_bar_a_plus()?;
    let mean_increment =
        linalg::dot(pi0, &m_bar_b) + linalg::dot(pi_bar0, &m_bar_a_plus);

    let mut d = Vec::with_capacity(horizon + 1);
    let mut acc = 0.0;
    for n in 0..=horizon as i64 {
        let mut inc = linalg::dot(pi0, &model.block_b(n).row_sums());
        inc += linalg::dot(pi_bar0, &model.block_a(n).row_sums());
        if n == 0 {
            inc += linalg::dot(pi_bar0, &model.block_a(-1).row_sums());
        }
        acc += inc;
        d.push(acc);
    }

    let mut d_i = Vec::with_capacity(horizon + 1);
    let mut acc_i = 0.0;
    for l in 0..=horizon as i64 {
        let num = linalg::dot(pi0, &model.tail_b(l).row_sums())
            + linalg::dot(pi_bar0, &model.tail_a(l).row_sums());
        acc_i += num / mean_increment;
        d_i.push(acc_i);
    }
    Ok(NLSDistribution { d, d_i, mean_increment })
}

/// Limit constants of the convergence formulas.
#[derive(Clone, Debug)]
pub struct LimitConstants {
    pub c_a: Vec<f64>,
    pub c_b: Vec<f64>,
    /// Level-difference limit over the reference tail.
    pub theta: f64,
    /// Level-difference limit over the integrated increment tail.
    pub theta_di: f64,
    /// Limit of the integrated increment tail over the reference tail.
    pub d_i_ratio: f64,
}

/// Assembles the limit constants from the tail estimates and a stationary
/// solution. The drift is taken from the solution.
pub fn limit_constants(
    model: &MG1Model,
    f: &TailDistribution,
    pi: &StationarySolution,
) -> Result<LimitConstants> {
    let default_grid = [256, 512, 1024, 2048, 4096];
    let est = estimate_c_vectors(model, f, &default_grid)?;
    if est.both_zero {
        return Err(Mg1Error::DegenerateLimit);
    }
    limit_constants_from(model, &est, pi)
}

fn limit_constants_from(
    model: &MG1Model,
    est: &CEstimate,
    pi: &StationarySolution,
) -> Result<LimitConstants> {
    let pi0 = pi.level(0);
    let pi_bar0 = &pi.pi_bar0;
    let numer = linalg::dot(pi0, &est.c_b) + linalg::dot(pi_bar0, &est.c_a);
    let mean_increment = linalg::dot(pi0, &model.m_bar_b()?)
        + linalg::dot(pi_bar0, &model.m_bar_a_plus()?);
    let neg_sigma = -pi.sigma;
    if neg_sigma <= 0.0 {
        return Err(Mg1Error::DriftNonNegative { sigma: pi.sigma });
    }
    let theta = numer / neg_sigma;
    let theta_di = mean_increment / neg_sigma;
    let d_i_ratio = numer / mean_increment;
    if est.both_zero || theta <= 0.0 {
        return Err(Mg1Error::DegenerateLimit);
    }
    Ok(LimitConstants { c_a: est.c_a.clone(), c_b: est.c_b.clone(), theta, theta_di, d_i_ratio })
}

/// One `(N, k)` cell of the convergence sweep.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub n: usize,
    pub k: usize,
    pub err_signed: f64,
    pub err_l1: f64,
    pub ratio_f: f64,
    pub ratio_di: f64,
    pub ratio_pitail: f64,
    pub rel_tv_ratio: f64,
    pub target_theta_pik: f64,
    pub target_theta_di_pik: f64,
    pub target_pik: f64,
}

/// Truncation-error ratios along a grid of truncation levels, against a
/// high-level reference solution.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub grid: Vec<usize>,
    pub k_max: usize,
    pub n_ref: usize,
    pub constants: Option<LimitConstants>,
    pub rows: Vec<ConvergenceRow>,
    /// Reference survival values per grid entry.
    pub sf_ref: Vec<f64>,
    /// Integrated increment tail per grid entry.
    pub d_i_bar: Vec<f64>,
    /// Reference-solution mass above each grid entry.
    pub pi_tail_ref: Vec<f64>,
    /// The block tails vanish against this reference (constants are zero).
    pub degenerate_limit: bool,
    /// The reference decays more slowly than the block tails.
    pub reference_mismatch: bool,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Runs the full sweep: a reference solve at `n_ref`, one truncated solve per
/// grid entry (in parallel), and all per-level error ratios with their
/// theoretical targets.
pub fn convergence_sweep(
    model: &MG1Model,
    f: &TailDistribution,
    n_grid: &[usize],
    k_max: usize,
    n_ref: usize,
) -> Result<ConvergenceReport> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Mg1Error::InvalidModel("grid must be nonempty and strictly increasing".into()));
    }
    let max_n = *n_grid.last().unwrap();
    if n_ref < 16 * max_n {
        return Err(Mg1Error::HorizonTooShort { need: 16 * max_n, have: n_ref });
    }

    let horizon_ref = max_n.max(k_max) + 1;
    let pi_ref = pi_truncated(model, n_ref, horizon_ref)?;

    let est_grid: Vec<i64> = {
        let mut g: Vec<i64> = (0..5).map(|i| (n_ref as i64 >> (4 - i)).max(2 + i)).collect();
        g.dedup();
        g
    };
    let est = estimate_c_vectors(model, f, &est_grid)?;
    let constants = if est.both_zero {
        None
    } else {
        Some(limit_constants_from(model, &est, &pi_ref)?)
    };

    let solutions: Result<Vec<StationarySolution>> = n_grid
        .par_iter()
        .map(|&n| pi_truncated(model, n, k_max))
        .collect();
    let solutions = solutions?;

    let pi0 = pi_ref.level(0);
    let pi_bar0 = &pi_ref.pi_bar0;
    let mean_increment = linalg::dot(pi0, &model.m_bar_b()?)
        + linalg::dot(pi_bar0, &model.m_bar_a_plus()?);

    let mut rows = Vec::with_capacity(n_grid.len() * (k_max + 1));
    let mut sf_ref = Vec::new();
    let mut d_i_bar = Vec::new();
    let mut pi_tail_ref = Vec::new();
    let (theta, theta_di) = constants
        .as_ref()
        .map(|c| (c.theta, c.theta_di))
        .unwrap_or((0.0, 0.0));
    for (&n, sol) in n_grid.iter().zip(&solutions) {
        let sfn = f.sf(n as i64);
        let dibar = (linalg::dot(pi0, &model.double_tail_b(n as i64)?.row_sums())
            + linalg::dot(pi_bar0, &model.double_tail_a(n as i64)?.row_sums()))
            / mean_increment;
        let pitail = pi_ref.tail_mass_above(n);
        sf_ref.push(sfn);
        d_i_bar.push(dibar);
        pi_tail_ref.push(pitail);
        for k in 0..=k_max {
            let diff: Vec<f64> = sol
                .level(k)
                .iter()
                .zip(pi_ref.level(k))
                .map(|(a, b)| a - b)
                .collect();
            let err_signed: f64 = diff.iter().sum();
            let err_l1 = linalg::l1_norm(&diff);
            let pik = pi_ref.level_mass(k);
            rows.push(ConvergenceRow {
                n,
                k,
                err_signed,
                err_l1,
                ratio_f: safe_div(err_signed, sfn),
                ratio_di: safe_div(err_signed, dibar),
                ratio_pitail: safe_div(err_signed, pitail),
                rel_tv_ratio: safe_div(err_l1, pik * sfn),
                target_theta_pik: theta * pik,
                target_theta_di_pik: theta_di * pik,
                target_pik: pik,
            });
        }
    }

    Ok(ConvergenceReport {
        grid: n_grid.to_vec(),
        k_max,
        n_ref,
        constants,
        rows,
        sf_ref,
        d_i_bar,
        pi_tail_ref,
        degenerate_limit: est.both_zero && !model.has_parametric_tail(),
        reference_mismatch: est.vanishing || (est.both_zero && model.has_parametric_tail()),
    })
}

impl ConvergenceReport {
    /// Deterministic CSV rendering: header plus one row per `(N, k)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "N,k,err_signed,err_l1,ratio_F,ratio_DI,ratio_pitail,rel_tv_ratio,\
             target_theta_pik,target_thetaDI_pik,target_pik\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.k,
                crate::format_sig17(r.err_signed),
                crate::format_sig17(r.err_l1),
                crate::format_sig17(r.ratio_f),
                crate::format_sig17(r.ratio_di),
                crate::format_sig17(r.ratio_pitail),
                crate::format_sig17(r.rel_tv_ratio),
                crate::format_sig17(r.target_theta_pik),
                crate::format_sig17(r.target_theta_di_pik),
                crate::format_sig17(r.target_pik),
            ));
        }
        out
    }

    pub fn row(&self, n: usize, k: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n && r.k == k)
    }
}
