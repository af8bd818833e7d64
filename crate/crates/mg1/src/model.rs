//! Block-structured transition models: an upper block-Hessenberg stochastic
//! matrix described by a boundary row of `B` blocks, a repeating row of `A`
//! blocks, and optional parametric tails extending the block sequences past
//! their explicit support.
//!
//! Block layout, with `e` the all-ones column vector:
//!
//! ```text
//!         level 0   level 1   level 2   level 3
//! level 0  B(0)      B(1)      B(2)      B(3)   ...     boundary row
//! level 1  B(-1)     A(0)      A(1)      A(2)   ...     first repeating row
//! level 2   O        A(-1)     A(0)      A(1)   ...
//! level 3   O         O        A(-1)     A(0)   ...
//! ```
//!
//! `B(0)` is `m0 x m0`, `B(k)` for `k >= 1` is `m0 x m1`, `B(-1)` is
//! `m1 x m0`, and every `A(k)` is `m1 x m1`. Models are immutable after
//! construction; all operations are pure reads.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Mg1Error, Result};
use crate::linalg::{self, Matrix};
use crate::tail::TailFamily;
use crate::tol::{EPS_SOLVE, EPS_STOCH, EPS_TAIL};

/// Dense nonnegative block of transition probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    mat: Matrix,
}

impl BlockMatrix {
    /// Wraps a matrix after checking every entry is finite and nonnegative.
    pub fn new(mat: Matrix) -> Result<Self> {
        if !mat.is_finite() {
            return Err(Mg1Error::InvalidModel("block contains non-finite entries".into()));
        }
        if mat.min_entry() < 0.0 {
            return Err(Mg1Error::InvalidModel("block contains negative entries".into()));
        }
        Ok(BlockMatrix { mat })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        BlockMatrix { mat: Matrix::zeros(rows, cols) }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        BlockMatrix::new(Matrix::from_rows(rows)?)
    }

    pub fn mat(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_mat(self) -> Matrix {
        self.mat
    }
}

impl Deref for BlockMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.mat
    }
}

/// Rank-one parametric continuation of a block sequence: block `k` beyond the
/// explicit cutoff is `row_scale (x) pmf(k) * col_profile`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricTail {
    pub family: TailFamily,
    pub row_scale: Vec<f64>,
    pub col_profile: Vec<f64>,
}

impl ParametricTail {
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.row_scale.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Mg1Error::InvalidTail("row_scale must be finite and nonnegative".into()));
        }
        let psum: f64 = self.col_profile.iter().sum();
        if self.col_profile.iter().any(|&v| !(v >= 0.0)) || (psum - 1.0).abs() > EPS_STOCH {
            return Err(Mg1Error::InvalidTail(format!(
                "col_profile must be a probability vector (sum {psum})"
            )));
        }
        Ok(())
    }

    /// The block at index `k` relative to `cutoff` (nonzero only past it).
    fn block(&self, k: i64, cutoff: i64) -> Option<Matrix> {
        if k <= cutoff {
            return None;
        }
        Some(Matrix::outer(&self.row_scale, &self.col_profile).scaled(self.family.pmf(k)))
    }

}

/// An M/G/1-type transition structure.
#[derive(Clone, Debug)]
pub struct MG1Model {
    m0: usize,
    m1: usize,
    /// `A(-1), A(0), ..., A(k_a)`; index `i` holds `A(i - 1)`.
    a_blocks: Vec<BlockMatrix>,
    /// `B(-1)`.
    b_down: BlockMatrix,
    /// `B(0), B(1), ..., B(k_b)`.
    b_blocks: Vec<BlockMatrix>,
    a_tail: Option<ParametricTail>,
    b_tail: Option<ParametricTail>,
}

/// One named defect found by [`MG1Model::validate`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub magnitude: f64,
}

/// Diagnostics for the structural assumptions: irreducibility, row-sum
/// identities, tail moments and the mean drift.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub irreducible_p: bool,
    pub irreducible_a: bool,
    /// Mean level drift per step under the stationary phase mix.
    pub sigma: f64,
    pub m_bar_a: Vec<f64>,
    pub m_bar_b: Vec<f64>,
    pub m_bar_a_plus: Vec<f64>,
    pub varpi: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl MG1Model {
    /// Builds a model from its block sequences.
    ///
    /// Shape and sign defects are rejected here; stochasticity and drift
    /// defects are left to [`MG1Model::validate`], which reports them as
    /// violations so that defective inputs can still be inspected.
    pub fn new(
        m0: usize,
        m1: usize,
        a_blocks: Vec<BlockMatrix>,
        b_down: BlockMatrix,
        b_blocks: Vec<BlockMatrix>,
        a_tail: Option<ParametricTail>,
        b_tail: Option<ParametricTail>,
    ) -> Result<Self> {
        if m0 == 0 || m1 == 0 {
            return Err(Mg1Error::InvalidModel("phase counts must be positive".into()));
        }
        if a_blocks.is_empty() {
            return Err(Mg1Error::InvalidModel("need at least the downward block A(-1)".into()));
        }
        if b_blocks.is_empty() {
            return Err(Mg1Error::InvalidModel("need at least the boundary block B(0)".into()));
        }
        for (i, blk) in a_blocks.iter().enumerate() {
            if blk.rows() != m1 || blk.cols() != m1 {
                return Err(Mg1Error::DimensionMismatch(format!(
                    "A({}) is {}x{}, expected {m1}x{m1}",
                    i as i64 - 1,
                    blk.rows(),
                    blk.cols()
                )));
            }
        }
        if b_down.rows() != m1 || b_down.cols() != m0 {
            return Err(Mg1Error::DimensionMismatch(format!(
                "B(-1) is {}x{}, expected {m1}x{m0}",
                b_down.rows(),
                b_down.cols()
            )));
        }
        for (k, blk) in b_blocks.iter().enumerate() {
            let want_cols = if k == 0 { m0 } else { m1 };
            if blk.rows() != m0 || blk.cols() != want_cols {
                return Err(Mg1Error::DimensionMismatch(format!(
                    "B({k}) is {}x{}, expected {m0}x{want_cols}",
                    blk.rows(),
                    blk.cols()
                )));
            }
        }
        if let Some(t) = &a_tail {
            t.validate()?;
            if t.row_scale.len() != m1 || t.col_profile.len() != m1 {
                return Err(Mg1Error::DimensionMismatch("a_tail vector lengths".into()));
            }
        }
        if let Some(t) = &b_tail {
            t.validate()?;
            if t.row_scale.len() != m0 || t.col_profile.len() != m1 {
                return Err(Mg1Error::DimensionMismatch("b_tail vector lengths".into()));
            }
        }
        Ok(MG1Model { m0, m1, a_blocks, b_down, b_blocks, a_tail, b_tail })
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    /// Largest explicitly stored `A` index (`-1` when only `A(-1)` is stored).
    pub fn k_a(&self) -> i64 {
        self.a_blocks.len() as i64 - 2
    }

    /// Largest explicitly stored `B` index.
    pub fn k_b(&self) -> i64 {
        self.b_blocks.len() as i64 - 1
    }

    pub fn a_tail(&self) -> Option<&ParametricTail> {
        self.a_tail.as_ref()
    }

    pub fn b_tail(&self) -> Option<&ParametricTail> {
        self.b_tail.as_ref()
    }

    pub fn has_parametric_tail(&self) -> bool {
        self.a_tail.is_some() || self.b_tail.is_some()
    }

    /// `A(k)` for `k >= -1`: the stored block, the parametric tail block, or
    /// zero past all support.
    pub fn block_a(&self, k: i64) -> BlockMatrix {
        assert!(k >= -1, "A(k) defined for k >= -1");
        if k <= self.k_a() {
            return self.a_blocks[(k + 1) as usize].clone();
        }
        match self.a_tail.as_ref().and_then(|t| t.block(k, self.k_a())) {
            Some(m) => BlockMatrix { mat: m },
            None => BlockMatrix::zeros(self.m1, self.m1),
        }
    }

    /// `B(k)` for `k >= -1`. Shapes vary: `m1 x m0` at `k = -1`, `m0 x m0` at
    /// `k = 0`, `m0 x m1` above.
    pub fn block_b(&self, k: i64) -> BlockMatrix {
        assert!(k >= -1, "B(k) defined for k >= -1");
        if k == -1 {
            return self.b_down.clone();
        }
        if k <= self.k_b() {
            return self.b_blocks[k as usize].clone();
        }
        match self.b_tail.as_ref().and_then(|t| t.block(k, self.k_b().max(0))) {
            Some(m) => BlockMatrix { mat: m },
            None => BlockMatrix::zeros(self.m0, self.m1),
        }
    }

    /// Tail sum `sum_{l > k} A(l)` for `k >= -2`, exact: explicit blocks plus
    /// the closed-form mass of the parametric tail.
    pub fn tail_a(&self, k: i64) -> BlockMatrix {
        assert!(k >= -2, "tail of A defined for k >= -2");
        let mut acc = Matrix::zeros(self.m1, self.m1);
        for l in (k + 1).max(-1)..=self.k_a() {
            acc.add_assign(self.a_blocks[(l + 1) as usize].mat());
        }
        if let Some(t) = &self.a_tail {
            let from = k.max(self.k_a());
            acc.add_assign(
                &Matrix::outer(&t.row_scale, &t.col_profile).scaled(t.family.sf(from)),
            );
        }
        BlockMatrix { mat: acc }
    }

    /// Tail sum `sum_{l > k} B(l)` for `k >= 0` (all summands are `m0 x m1`).
    pub fn tail_b(&self, k: i64) -> BlockMatrix {
        assert!(k >= 0, "tail of B defined for k >= 0");
        let mut acc = Matrix::zeros(self.m0, self.m1);
        for l in (k + 1).max(1)..=self.k_b() {
            acc.add_assign(self.b_blocks[l as usize].mat());
        }
        if let Some(t) = &self.b_tail {
            let from = k.max(self.k_b().max(0));
            acc.add_assign(
                &Matrix::outer(&t.row_scale, &t.col_profile).scaled(t.family.sf(from)),
            );
        }
        BlockMatrix { mat: acc }
    }

    /// Double tail `sum_{l > k} sum_{j > l} A(j)` for `k >= -3`.
    pub fn double_tail_a(&self, k: i64) -> Result<BlockMatrix> {
        assert!(k >= -3, "double tail of A defined for k >= -3");
        // Tails at l >= head_end are pure parametric mass (or zero).
        let head_end = self.k_a().max(k + 1);
        let mut acc = Matrix::zeros(self.m1, self.m1);
        for l in (k + 1).max(-2)..head_end {
            acc.add_assign(self.tail_a(l).mat());
        }
        if let Some(t) = &self.a_tail {
            let it = t.family.integrated_tail(head_end - 1)?;
            acc.add_assign(&Matrix::outer(&t.row_scale, &t.col_profile).scaled(it));
        }
        Ok(BlockMatrix { mat: acc })
    }

    /// Double tail `sum_{l > k} sum_{j > l} B(j)` for `k >= -1`.
    pub fn double_tail_b(&self, k: i64) -> Result<BlockMatrix> {
        assert!(k >= -1, "double tail of B defined for k >= -1");
        let head_end = self.k_b().max(0).max(k + 1);
        let mut acc = Matrix::zeros(self.m0, self.m1);
        for l in (k + 1).max(0)..head_end {
            acc.add_assign(self.tail_b(l).mat());
        }
        if let Some(t) = &self.b_tail {
            let it = t.family.integrated_tail(head_end - 1)?;
            acc.add_assign(&Matrix::outer(&t.row_scale, &t.col_profile).scaled(it));
        }
        Ok(BlockMatrix { mat: acc })
    }

    /// `A = sum_{k >= -1} A(k)`.
    pub fn a_sum(&self) -> Matrix {
        self.tail_a(-2).into_mat()
    }

    /// Row sums of the three row types of the transition matrix, in the order
    /// (boundary, first repeating, repeating).
    pub fn row_sum_defects(&self) -> (f64, f64, f64) {
        let boundary: Vec<f64> = {
            let mut s = self.b_blocks[0].row_sums();
            let t = self.tail_b(0);
            for (a, b) in s.iter_mut().zip(t.row_sums()) {
                *a += b;
            }
            s
        };
        let a_above: Vec<f64> = self.tail_a(-1).row_sums(); // sum_{k >= 0} A(k) e
        let level1: Vec<f64> = self
            .b_down
            .row_sums()
            .iter()
            .zip(&a_above)
            .map(|(b, a)| b + a)
            .collect();
        let repeating: Vec<f64> = self.a_sum().row_sums();
        let defect = |v: &[f64]| v.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        (defect(&boundary), defect(&level1), defect(&repeating))
    }

    /// `sum_k k A(k) e`.
    pub fn m_bar_a(&self) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.m1];
        for k in -1..=self.k_a() {
            for (a, b) in acc.iter_mut().zip(self.a_blocks[(k + 1) as usize].row_sums()) {
                *a += k as f64 * b;
            }
        }
        if let Some(t) = &self.a_tail {
            let pm = t.family.partial_mean_above(self.k_a().max(-1))?;
            for (a, &c) in acc.iter_mut().zip(&t.row_scale) {
                *a += c * pm;
            }
        }
        Ok(acc)
    }

    /// `sum_{k >= 1} k B(k) e`.
    pub fn m_bar_b(&self) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.m0];
        for k in 1..=self.k_b() {
            for (a, b) in acc.iter_mut().zip(self.b_blocks[k as usize].row_sums()) {
                *a += k as f64 * b;
            }
        }
        if let Some(t) = &self.b_tail {
            let pm = t.family.partial_mean_above(self.k_b().max(0))?;
            for (a, &c) in acc.iter_mut().zip(&t.row_scale) {
                *a += c * pm;
            }
        }
        Ok(acc)
    }

    /// `sum_{k >= 1} k A(k) e = m_bar_a + A(-1) e`.
    pub fn m_bar_a_plus(&self) -> Result<Vec<f64>> {
        let mut acc = self.m_bar_a()?;
        for (a, b) in acc.iter_mut().zip(self.a_blocks[0].row_sums()) {
            *a += b;
        }
        Ok(acc)
    }

    /// Index past which every `A(k)` row mass is below `eps`.
    pub fn effective_support_a(&self, eps: f64) -> Result<i64> {
        match &self.a_tail {
            None => Ok(self.k_a().max(0)),
            Some(t) => {
                let scale = t.row_scale.iter().cloned().fold(0.0, f64::max).max(1e-300);
                Ok(self.k_a().max(t.family.support_cutoff(eps / scale)?))
            }
        }
    }

    pub fn effective_support_b(&self, eps: f64) -> Result<i64> {
        match &self.b_tail {
            None => Ok(self.k_b().max(0)),
            Some(t) => {
                let scale = t.row_scale.iter().cloned().fold(0.0, f64::max).max(1e-300);
                Ok(self.k_b().max(t.family.support_cutoff(eps / scale)?))
            }
        }
    }

    /// Materializes `A(-1), A(0), ..., A(upto)` as plain matrices.
    pub fn a_series(&self, upto: i64) -> Vec<Matrix> {
        (-1..=upto).map(|k| self.block_a(k).into_mat()).collect()
    }

    /// Materializes `B(1), ..., B(upto)` as plain matrices.
    pub fn b_series(&self, upto: i64) -> Vec<Matrix> {
        (1..=upto).map(|k| self.block_b(k).into_mat()).collect()
    }

    /// Structural diagnostics; never fails on a constructible model.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let (d_boundary, d_level1, d_repeat) = self.row_sum_defects();
        if d_boundary > EPS_STOCH {
            violations.push(Violation { name: "boundary row sum".into(), magnitude: d_boundary });
        }
        if d_level1 > EPS_STOCH {
            violations.push(Violation { name: "level-1 row sum".into(), magnitude: d_level1 });
        }
        if d_repeat > EPS_STOCH {
            violations.push(Violation { name: "repeating row sum".into(), magnitude: d_repeat });
        }

        let a = self.a_sum();
        let irreducible_a = linalg::strongly_connected(&a);
        if !irreducible_a {
            violations.push(Violation { name: "A not irreducible".into(), magnitude: 1.0 });
        }

        let l_irr = self.k_a().max(self.k_b()).max(1) as usize + 2;
        let irreducible_p = match crate::oracle::build_finite(self, l_irr) {
            Ok(chain) => linalg::strongly_connected(chain.p()),
            Err(_) => false,
        };
        if !irreducible_p {
            violations.push(Violation { name: "P not irreducible".into(), magnitude: 1.0 });
        }

        let varpi = match linalg::stationary_row_vector(&a, "stationary phase mix of A") {
            Ok(v) => v,
            Err(_) => {
                violations.push(Violation {
                    name: "phase mix of A unsolvable".into(),
                    magnitude: 1.0,
                });
                vec![f64::NAN; self.m1]
            }
        };

        // f64::MAX rather than infinity so the report stays JSON-representable.
        let m_bar_a = match self.m_bar_a() {
            Ok(v) => v,
            Err(_) => {
                violations.push(Violation {
                    name: "A tail mean diverges".into(),
                    magnitude: f64::MAX,
                });
                vec![f64::MAX; self.m1]
            }
        };
        let m_bar_b = match self.m_bar_b() {
            Ok(v) => v,
            Err(_) => {
                violations.push(Violation {
                    name: "B tail mean diverges".into(),
                    magnitude: f64::MAX,
                });
                vec![f64::MAX; self.m0]
            }
        };
        let m_bar_a_plus: Vec<f64> = m_bar_a
            .iter()
            .zip(self.a_blocks[0].row_sums())
            .map(|(m, d)| m + d)
            .collect();

        let sigma = linalg::dot(&varpi, &m_bar_a);
        if !(sigma < 0.0) {
            violations.push(Violation { name: "positive drift".into(), magnitude: sigma });
        }
        if self.a_blocks[0].max_abs() == 0.0 {
            violations.push(Violation { name: "A(-1) is zero".into(), magnitude: 0.0 });
        }
        let varpi_resid = linalg::l1_norm(&self.varpi_residual(&varpi));
        if varpi_resid > EPS_SOLVE {
            violations.push(Violation {
                name: "phase mix residual".into(),
                magnitude: varpi_resid,
            });
        }

        ValidationReport {
            irreducible_p,
            irreducible_a,
            sigma,
            m_bar_a,
            m_bar_b,
            m_bar_a_plus,
            varpi,
            violations,
        }
    }

    fn varpi_residual(&self, varpi: &[f64]) -> Vec<f64> {
        if varpi.iter().any(|v| !v.is_finite()) {
            return vec![f64::INFINITY];
        }
        let a = self.a_sum();
        a.vecmat(varpi).iter().zip(varpi).map(|(x, y)| x - y).collect()
    }

    /// Drift `sigma` alone, for callers that only gate on it.
    pub fn drift(&self) -> Result<f64> {
        let a = self.a_sum();
        let varpi = linalg::stationary_row_vector(&a, "stationary phase mix of A")?;
        Ok(linalg::dot(&varpi, &self.m_bar_a()?))
    }

    /// True when both block sequences stop at their explicit cutoffs.
    pub fn finite_support(&self) -> bool {
        !self.has_parametric_tail()
    }
}

impl MG1Model {
    /// Effective support honoring both explicit blocks and parametric tails
    /// at the crate-wide tail tolerance.
    pub fn series_cutoff_a(&self) -> Result<i64> {
        self.effective_support_a(EPS_TAIL)
    }

    pub fn series_cutoff_b(&self) -> Result<i64> {
        self.effective_support_b(EPS_TAIL)
    }
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BlockEntry {
    k: i64,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TailEntry {
    family: String,
    params: Vec<f64>,
    row_scale: Vec<f64>,
    col_profile: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    m0: usize,
    m1: usize,
    a_blocks: Vec<BlockEntry>,
    b_down: Vec<Vec<f64>>,
    b_blocks: Vec<BlockEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a_tail: Option<TailEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_tail: Option<TailEntry>,
}

fn tail_to_entry(t: &ParametricTail) -> TailEntry {
    let (family, params) = match t.family {
        TailFamily::Pareto { alpha, gamma } => ("pareto".to_string(), vec![alpha, gamma]),
        TailFamily::Weibull { lambda, alpha } => ("weibull".to_string(), vec![lambda, alpha]),
        TailFamily::Geometric { rho } => ("geometric".to_string(), vec![rho]),
    };
    TailEntry { family, params, row_scale: t.row_scale.clone(), col_profile: t.col_profile.clone() }
}

fn entry_to_tail(e: &TailEntry) -> Result<ParametricTail> {
    let family = parse_family(&e.family, &e.params)?;
    Ok(ParametricTail {
        family,
        row_scale: e.row_scale.clone(),
        col_profile: e.col_profile.clone(),
    })
}

/// Parses a `(name, params)` pair into a tail family, as used both by model
/// files and by CLI `family:p1,p2` arguments.
pub fn parse_family(name: &str, params: &[f64]) -> Result<TailFamily> {
    let fam = match (name, params) {
        ("pareto", [alpha, gamma]) => TailFamily::Pareto { alpha: *alpha, gamma: *gamma },
        ("weibull", [lambda, alpha]) => TailFamily::Weibull { lambda: *lambda, alpha: *alpha },
        ("geometric", [rho]) => TailFamily::Geometric { rho: *rho },
        _ => {
            return Err(Mg1Error::InvalidTail(format!(
                "unknown family or wrong parameter count: {name} {params:?}"
            )))
        }
    };
    fam.validate()?;
    Ok(fam)
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

impl MG1Model {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            m0: self.m0,
            m1: self.m1,
            a_blocks: (-1..=self.k_a())
                .map(|k| BlockEntry {
                    k,
                    matrix: matrix_to_rows(self.a_blocks[(k + 1) as usize].mat()),
                })
                .collect(),
            b_down: matrix_to_rows(self.b_down.mat()),
            b_blocks: (0..=self.k_b())
                .map(|k| BlockEntry { k, matrix: matrix_to_rows(self.b_blocks[k as usize].mat()) })
                .collect(),
            a_tail: self.a_tail.as_ref().map(tail_to_entry),
            b_tail: self.b_tail.as_ref().map(tail_to_entry),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let (m0, m1) = (file.m0, file.m1);
        if m0 == 0 || m1 == 0 {
            return Err(Mg1Error::InvalidModel("phase counts must be positive".into()));
        }

        let k_a = file.a_blocks.iter().map(|e| e.k).max().unwrap_or(-1).max(-1);
        let mut a_blocks: Vec<BlockMatrix> =
            (-1..=k_a).map(|_| BlockMatrix::zeros(m1, m1)).collect();
        for e in &file.a_blocks {
            if e.k < -1 {
                return Err(Mg1Error::InvalidModel(format!("A block with k = {}", e.k)));
            }
            a_blocks[(e.k + 1) as usize] = BlockMatrix::from_rows(&e.matrix)?;
        }

        let k_b = file.b_blocks.iter().map(|e| e.k).max().unwrap_or(0).max(0);
        let mut b_blocks: Vec<BlockMatrix> = (0..=k_b)
            .map(|k| BlockMatrix::zeros(m0, if k == 0 { m0 } else { m1 }))
            .collect();
        for e in &file.b_blocks {
            if e.k < 0 {
                return Err(Mg1Error::InvalidModel(format!(
                    "B block with k = {}; the downward block belongs in b_down",
                    e.k
                )));
            }
            b_blocks[e.k as usize] = BlockMatrix::from_rows(&e.matrix)?;
        }

        MG1Model::new(
            m0,
            m1,
            a_blocks,
            BlockMatrix::from_rows(&file.b_down)?,
            b_blocks,
            file.a_tail.as_ref().map(entry_to_tail).transpose()?,
            file.b_tail.as_ref().map(entry_to_tail).transpose()?,
        )
    }

    pub fn to_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        MG1Model::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{pareto1, scalar1};

    const ZETA3: f64 = 1.2020569031595942854;

    #[test]
    fn scalar1_blocks_and_tails() {
        let m = scalar1();
        assert_eq!(m.block_a(1).get(0, 0), 0.2);
        assert_eq!(m.block_a(5).get(0, 0), 0.0);
        assert_eq!(m.tail_a(0).get(0, 0), 0.2);
        assert_eq!(m.tail_a(1).get(0, 0), 0.0);
        assert_eq!(m.double_tail_a(0).unwrap().get(0, 0), 0.0);
        assert_eq!(m.double_tail_a(-1).unwrap().get(0, 0), 0.2);
    }

    #[test]
    fn pareto1_blocks_and_tails() {
        let m = pareto1();
        // 0.3 * (1 - (1/2)^3)
        assert!((m.block_a(0).get(0, 0) - 0.2625).abs() < 1e-15);
        for n in [0i64, 1, 3, 10] {
            let want = 0.3 * (1.0 / (n as f64 + 1.0)).powi(3);
            assert!((m.tail_a(n).get(0, 0) - want).abs() < 1e-15);
        }
        // 0.3 * (zeta(3) - 1)
        let want = 0.3 * (ZETA3 - 1.0);
        assert!((m.double_tail_a(0).unwrap().get(0, 0) - want).abs() < 1e-12);
    }

    #[test]
    fn validate_scalar1() {
        let r = scalar1().validate();
        assert!(r.is_clean(), "violations: {:?}", r.violations);
        assert!((r.sigma + 0.4).abs() < 1e-14);
        assert_eq!(r.varpi, vec![1.0]);
        assert!((r.m_bar_b[0] - 0.5).abs() < 1e-14);
        assert!(r.irreducible_p && r.irreducible_a);
    }

    #[test]
    fn validate_pareto1() {
        let r = pareto1().validate();
        assert!(r.is_clean(), "violations: {:?}", r.violations);
        let want = -0.7 + 0.3 * ZETA3;
        assert!((r.sigma - want).abs() < 1e-12, "sigma {}", r.sigma);
        assert!((r.m_bar_a_plus[0] - 0.3 * ZETA3).abs() < 1e-12);
    }

    #[test]
    fn validate_flags_positive_drift() {
        let m = MG1Model::new(
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
        .unwrap();
        let r = m.validate();
        assert!((r.sigma - 0.8).abs() < 1e-14);
        assert!(r.violations.iter().any(|v| v.name == "positive drift"));
    }

    #[test]
    fn tail_minus_tail_is_block() {
        let m = pareto1();
        for k in -1..40 {
            let lhs = m.tail_a(k).sub(m.tail_a(k + 1).mat());
            let rhs = m.block_a(k + 1);
            assert!(lhs.sub(rhs.mat()).max_abs() < EPS_TAIL);
        }
    }

    #[test]
    fn double_tail_matches_brute_force_partial_sum() {
        let m = pareto1();
        let k = 2i64;
        let exact = m.double_tail_a(k).unwrap().get(0, 0);
        let cap = 100_000i64;
        let mut brute = 0.0;
        for l in (k + 1)..=cap {
            brute += m.tail_a(l).get(0, 0);
        }
        // Remainder past the cap: 0.3 * sum_{l > cap} sf(l) <= 0.3 / (2 cap^2).
        let bound = 0.3 / (2.0 * (cap as f64) * (cap as f64));
        assert!((exact - brute).abs() <= bound + 1e-13, "diff {}", (exact - brute).abs());
    }

    #[test]
    fn rejects_zero_phase_counts_and_bad_shapes() {
        assert!(MG1Model::new(
            0,
            1,
            vec![BlockMatrix::zeros(1, 1)],
            BlockMatrix::zeros(1, 1),
            vec![BlockMatrix::zeros(1, 1)],
            None,
            None
        )
        .is_err());
        // B(-1) with wrong shape.
        assert!(MG1Model::new(
            1,
            2,
            vec![BlockMatrix::zeros(2, 2)],
            BlockMatrix::zeros(1, 2),
            vec![BlockMatrix::zeros(1, 1)],
            None,
            None
        )
        .is_err());
        assert!(BlockMatrix::from_rows(&[vec![-0.1]]).is_err());
        assert!(BlockMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        for m in [scalar1(), pareto1()] {
            let text = m.to_json();
            let back = MG1Model::from_json(&text).unwrap();
            assert_eq!(back.m0(), m.m0());
            assert_eq!(back.k_a(), m.k_a());
            for k in -1..=m.k_a().max(3) {
                assert!(back.block_a(k).sub(m.block_a(k).mat()).max_abs() == 0.0);
            }
            let r = back.validate();
            assert!(r.is_clean());
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(MG1Model::from_json("{ nope"), Err(Mg1Error::Parse(_))));
    }
}
