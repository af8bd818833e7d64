//! Parametric builders for test models: scalar chains with explicit or
//! parametric up-tails, and seeded multi-phase chains with a target drift.
//!
//! The phased builder draws its structure from a ChaCha8 stream cipher RNG,
//! so a seed pins the model byte for byte across platforms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Mg1Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::{BlockMatrix, MG1Model, ParametricTail};
use crate::tail::TailFamily;

/// Single-phase model: downward mass `down`, explicit up-step masses
/// `body[k] = A(k)`, and an optional parametric tail past the body.
///
/// The boundary row defaults to `B(0) = B(1) = 0.5`; the level-1 downward
/// mass equals `down`.
pub fn make_scalar(down: f64, body: &[f64], tail: Option<ParametricTail>) -> Result<MG1Model> {
    make_scalar_with_boundary(down, body, tail, &[0.5, 0.5])
}

pub fn make_scalar_with_boundary(
    down: f64,
    body: &[f64],
    tail: Option<ParametricTail>,
    boundary: &[f64],
) -> Result<MG1Model> {
    if !(down > 0.0 && down <= 1.0) {
        return Err(Mg1Error::MassMismatch(format!("downward mass {down} outside (0, 1]")));
    }
    let cutoff = body.len() as i64 - 1;
    let tail_mass = match &tail {
        Some(t) => {
            t.validate()?;
            if t.row_scale.len() != 1 || t.col_profile.len() != 1 {
                return Err(Mg1Error::DimensionMismatch("scalar tail vectors".into()));
            }
            t.row_scale[0] * t.family.sf(cutoff)
        }
        None => 0.0,
    };
    let total = down + body.iter().sum::<f64>() + tail_mass;
    if (total - 1.0).abs() > 1e-12 {
        return Err(Mg1Error::MassMismatch(format!("repeating row mass {total}")));
    }
    let b_total: f64 = boundary.iter().sum();
    if (b_total - 1.0).abs() > 1e-12 {
        return Err(Mg1Error::MassMismatch(format!("boundary row mass {b_total}")));
    }

    let mut a_blocks = vec![BlockMatrix::from_rows(&[vec![down]])?];
    for &m in body {
        a_blocks.push(BlockMatrix::from_rows(&[vec![m]])?);
    }
    let b_blocks = boundary
        .iter()
        .map(|&m| BlockMatrix::from_rows(&[vec![m]]))
        .collect::<Result<Vec<_>>>()?;
    MG1Model::new(
        1,
        1,
        a_blocks,
        BlockMatrix::from_rows(&[vec![down]])?,
        b_blocks,
        tail,
        None,
    )
}

/// Parameters for the seeded multi-phase builder.
#[derive(Clone, Debug)]
pub struct PhasedConfig {
    pub m0: usize,
    pub m1: usize,
    pub seed: u64,
    pub tail: Option<TailFamily>,
    pub drift_target: f64,
    /// Number of explicit up-blocks `A(0..body_len-1)`.
    pub body_len: usize,
    /// Force the downward block to a rank-one matrix.
    pub rank_one_down: bool,
}

impl PhasedConfig {
    pub fn new(m0: usize, m1: usize, seed: u64, tail: Option<TailFamily>, drift_target: f64) -> Self {
        PhasedConfig { m0, m1, seed, tail, drift_target, body_len: 4, rank_one_down: false }
    }
}

/// Seeded multi-phase model with the requested mean drift.
///
/// The repeating row is a mixture `A(-1) = t D`, `A(k) = (1 - t) V(k)` of a
/// stochastic downward kernel `D` and a stochastic up-step family `V`; the
/// mixing weight `t` is found by bisection, which is decisive because the
/// drift runs continuously from positive (all up) to `-1` (all down).
pub fn make_phased(cfg: &PhasedConfig) -> Result<MG1Model> {
    if cfg.m0 == 0 || cfg.m1 == 0 || cfg.m0 > 50 || cfg.m1 > 50 {
        return Err(Mg1Error::InvalidModel("phase counts must be in 1..=50".into()));
    }
    if !(cfg.drift_target > -1.0 && cfg.drift_target < 0.0) {
        return Err(Mg1Error::CannotReachDrift {
            target: cfg.drift_target,
            reason: "mixture drifts span (-1, 0) only".into(),
        });
    }
    if let Some(t) = &cfg.tail {
        t.validate()?;
    }
    let m0 = cfg.m0;
    let m1 = cfg.m1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let down = if cfg.rank_one_down {
        // Identical stochastic rows: an outer product e * v.
        let v = random_stochastic_row(&mut rng, m1);
        Matrix::outer(&vec![1.0; m1], &v)
    } else {
        random_stochastic(&mut rng, m1, m1)
    };

    // Up-step family with unit total row mass, split between explicit blocks
    // and the parametric tail.
    let mut raw: Vec<Matrix> = (0..cfg.body_len).map(|_| random_positive(&mut rng, m1, m1)).collect();
    let tail_profile = random_stochastic_row(&mut rng, m1);
    let mut tail_scale: Vec<f64> = (0..m1).map(|_| 0.2 + 0.6 * rng.gen::<f64>()).collect();
    let tail_sf0 = cfg.tail.map(|f| f.sf(cfg.body_len as i64 - 1)).unwrap_or(0.0);
    for i in 0..m1 {
        let mut total: f64 = raw.iter().map(|b| linalg::sum(b.row(i))).sum();
        if cfg.tail.is_some() {
            total += tail_scale[i] * tail_sf0;
        }
        for b in &mut raw {
            for v in b.row_mut(i) {
                *v /= total;
            }
        }
        tail_scale[i] /= total;
    }
    let up_mean = up_family_mean(&raw, &tail_scale, cfg.tail.as_ref(), cfg.body_len as i64 - 1)?;

    // sigma(t) = varpi_t . (-t e + (1 - t) up_mean); bisect on t.
    let sigma_of = |t: f64| -> Result<f64> {
        let mut a_sum = down.scaled(t);
        for b in &raw {
            a_sum.add_assign_scaled(b, 1.0 - t);
        }
        if cfg.tail.is_some() {
            let sf_total = cfg.tail.as_ref().unwrap().sf(cfg.body_len as i64 - 1);
            a_sum.add_assign_scaled(
                &Matrix::outer(&tail_scale, &tail_profile),
                (1.0 - t) * sf_total,
            );
        }
        let varpi = linalg::stationary_row_vector(&a_sum, "phase mix during drift targeting")?;
        let m_bar: Vec<f64> =
            up_mean.iter().map(|&u| -t + (1.0 - t) * u).collect();
        Ok(linalg::dot(&varpi, &m_bar))
    };

    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
    let s_lo = sigma_of(lo)?;
    let s_hi = sigma_of(hi)?;
    if !(s_lo > cfg.drift_target && s_hi < cfg.drift_target) {
        return Err(Mg1Error::CannotReachDrift {
            target: cfg.drift_target,
            reason: format!("drift range is [{s_hi:.4}, {s_lo:.4}] over the mixing weight"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sigma_of(mid)? > cfg.drift_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let achieved = sigma_of(t)?;
    if (achieved - cfg.drift_target).abs() > 1e-6 {
        return Err(Mg1Error::CannotReachDrift {
            target: cfg.drift_target,
            reason: format!("bisection stalled at sigma = {achieved}"),
        });
    }

    let mut a_blocks = vec![BlockMatrix::new(down.scaled(t))?];
    for b in &raw {
        a_blocks.push(BlockMatrix::new(b.scaled(1.0 - t))?);
    }
    let a_tail = cfg.tail.map(|family| ParametricTail {
        family,
        row_scale: tail_scale.iter().map(|s| s * (1.0 - t)).collect(),
        col_profile: tail_profile.clone(),
    });

    // Boundary row: two random blocks normalized together.
    let b0 = random_positive(&mut rng, m0, m0);
    let b1 = random_positive(&mut rng, m0, m1);
    let (b0, b1) = {
        let mut b0 = b0;
        let mut b1 = b1;
        for i in 0..m0 {
            let total = linalg::sum(b0.row(i)) + linalg::sum(b1.row(i));
            for v in b0.row_mut(i) {
                *v /= total;
            }
            for v in b1.row_mut(i) {
                *v /= total;
            }
        }
        (b0, b1)
    };
    // Level-1 downward block carries mass t per row.
    let mut b_down = random_positive(&mut rng, m1, m0);
    for i in 0..m1 {
        let total = linalg::sum(b_down.row(i));
        for v in b_down.row_mut(i) {
            *v *= t / total;
        }
    }

    let model = MG1Model::new(
        m0,
        m1,
        a_blocks,
        BlockMatrix::new(b_down)?,
        vec![BlockMatrix::new(b0)?, BlockMatrix::new(b1)?],
        a_tail,
        None,
    )?;
    let report = model.validate();
    if !report.is_clean() {
        return Err(Mg1Error::InvalidModel(format!(
            "generated model failed validation: {:?}",
            report.violations
        )));
    }
    Ok(model)
}

fn up_family_mean(
    raw: &[Matrix],
    tail_scale: &[f64],
    tail: Option<&TailFamily>,
    cutoff: i64,
) -> Result<Vec<f64>> {
    let m1 = tail_scale.len();
    let mut mean = vec![0.0; m1];
    for (k, b) in raw.iter().enumerate() {
        for (i, m) in mean.iter_mut().enumerate() {
            *m += k as f64 * linalg::sum(b.row(i));
        }
    }
    if let Some(f) = tail {
        let pm = f.partial_mean_above(cutoff)?;
        for (m, &s) in mean.iter_mut().zip(tail_scale) {
            *m += s * pm;
        }
    }
    Ok(mean)
}

fn random_positive(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, 0.05 + rng.gen::<f64>());
        }
    }
    m
}

fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = random_positive(rng, rows, cols);
    for i in 0..rows {
        let s = linalg::sum(m.row(i));
        for v in m.row_mut(i) {
            *v /= s;
        }
    }
    m
}

fn random_stochastic_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_presets_have_expected_drift() {
        let m = make_scalar(0.6, &[0.2, 0.2], None).unwrap();
        assert!((m.validate().sigma + 0.4).abs() < 1e-14);

        let tail = ParametricTail {
            family: TailFamily::Pareto { alpha: 3.0, gamma: 1.0 },
            row_scale: vec![0.3],
            col_profile: vec![1.0],
        };
        let p = make_scalar(0.7, &[], Some(tail)).unwrap();
        assert!((p.validate().sigma + 0.33938293935).abs() < 1e-9);
    }

    #[test]
    fn scalar_mass_mismatch_is_rejected() {
        assert!(matches!(
            make_scalar(0.6, &[0.2, 0.3], None),
            Err(Mg1Error::MassMismatch(_))
        ));
    }

    #[test]
    fn pure_death_chain_builds() {
        let m = make_scalar(1.0, &[], None).unwrap();
        assert!((m.validate().sigma + 1.0).abs() < 1e-14);
    }

    #[test]
    fn phased_hits_drift_target() {
        let cfg = PhasedConfig::new(
            2,
            2,
            7,
            Some(TailFamily::Pareto { alpha: 3.0, gamma: 1.0 }),
            -0.3,
        );
        let m = make_phased(&cfg).unwrap();
        let r = m.validate();
        assert!(r.is_clean(), "{:?}", r.violations);
        assert!(r.sigma > -0.300001 && r.sigma < -0.299999, "sigma {}", r.sigma);
    }

    #[test]
    fn rank_one_downward_block() {
        let mut cfg = PhasedConfig::new(2, 3, 11, None, -0.4);
        cfg.rank_one_down = true;
        let m = make_phased(&cfg).unwrap();
        let d = m.block_a(-1);
        // All 2x2 minors of a rank-one matrix vanish.
        for i in 0..3 {
            for j in (i + 1)..3 {
                for p in 0..3 {
                    for q in (p + 1)..3 {
                        let det = d.get(i, p) * d.get(j, q) - d.get(i, q) * d.get(j, p);
                        assert!(det.abs() < 1e-12, "minor {det}");
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_model() {
        let cfg = PhasedConfig::new(2, 3, 99, Some(TailFamily::Geometric { rho: 0.5 }), -0.35);
        let a = make_phased(&cfg).unwrap();
        let b = make_phased(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn unreachable_drift_errors() {
        let cfg = PhasedConfig::new(1, 2, 3, None, -0.5e-9);
        // Target essentially zero is still within (-1, 0); an out-of-range one fails fast.
        assert!(make_phased(&cfg).is_ok() || matches!(make_phased(&cfg), Err(Mg1Error::CannotReachDrift { .. })));
        let bad = PhasedConfig::new(1, 2, 3, None, 0.2);
        assert!(matches!(make_phased(&bad), Err(Mg1Error::CannotReachDrift { .. })));
    }

    #[test]
    fn generated_models_validate_clean() {
        for seed in [1u64, 2, 3] {
            let cfg = PhasedConfig::new(2, 3, seed, None, -0.4);
            let m = make_phased(&cfg).unwrap();
            assert!(m.validate().is_clean());
        }
    }
}
