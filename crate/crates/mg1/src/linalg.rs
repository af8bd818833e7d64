//! Dense matrix helpers sized for desk-scale problems: phase blocks of a few
//! dozen rows and oracle transition matrices up to a few thousand states.
//!
//! Row-major storage throughout. Solvers are direct: LU with partial pivoting
//! for general systems, and a pivot-free banded elimination for the
//! M-matrix systems arising from substochastic kernels (their Schur
//! complements stay M-matrices, so no pivoting is required).

use crate::error::{Mg1Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Mg1Error::DimensionMismatch("matrix with zero rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Mg1Error::DimensionMismatch("matrix with zero columns".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Mg1Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    /// Rank-one product `col * row`.
    pub fn outer(col: &[f64], row: &[f64]) -> Self {
        let mut m = Matrix::zeros(col.len(), row.len());
        for (i, &c) in col.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                m.data[i * m.cols + j] = c * r;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        m
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        m
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Matrix, s: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.cols);
        self.matmul_into(other, &mut out);
        out
    }

    /// `out = self * other` without allocating; `out` must be pre-sized.
    pub fn matmul_into(&self, other: &Matrix, out: &mut Matrix) {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        assert_eq!((out.rows, out.cols), (self.rows, other.cols));
        out.data.fill(0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * out.cols..(i + 1) * out.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
    }

    /// `self * v` for a column vector.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `v * self` for a row vector.
    pub fn vecmat(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// LU factorization with partial pivoting.
pub struct LuFactors {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
}

pub fn lu_factor(m: &Matrix, context: &str) -> Result<LuFactors> {
    assert_eq!(m.rows(), m.cols(), "lu_factor needs a square matrix");
    let n = m.rows();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = m.max_abs().max(1e-300);
    for col in 0..n {
        let mut piv = col;
        let mut best = lu.get(col, col).abs();
        for r in col + 1..n {
            let v = lu.get(r, col).abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-14 * scale {
            return Err(Mg1Error::SingularMatrix(context.to_string()));
        }
        if piv != col {
            perm.swap(col, piv);
            for j in 0..n {
                let a = lu.get(col, j);
                let b = lu.get(piv, j);
                lu.set(col, j, b);
                lu.set(piv, j, a);
            }
        }
        let d = lu.get(col, col);
        for r in col + 1..n {
            let f = lu.get(r, col) / d;
            lu.set(r, col, f);
            if f == 0.0 {
                continue;
            }
            for j in col + 1..n {
                let v = lu.get(r, j) - f * lu.get(col, j);
                lu.set(r, j, v);
            }
        }
    }
    Ok(LuFactors { n, lu, perm })
}

impl LuFactors {
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..self.n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in i + 1..self.n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.n);
        let mut out = Matrix::zeros(self.n, b.cols());
        let mut col = vec![0.0; self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b.get(i, j);
            }
            let x = self.solve_vec(&col);
            for i in 0..self.n {
                out.set(i, j, x[i]);
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve_mat(&Matrix::identity(self.n))
    }
}

/// Convenience wrapper: solve `A x = b` once.
pub fn solve(a: &Matrix, b: &[f64], context: &str) -> Result<Vec<f64>> {
    Ok(lu_factor(a, context)?.solve_vec(b))
}

/// Stationary row vector of an irreducible stochastic matrix: direct solve of
/// `(P^T - I) x = 0` with the last equation replaced by normalization.
pub fn stationary_row_vector(p: &Matrix, context: &str) -> Result<Vec<f64>> {
    assert_eq!(p.rows(), p.cols());
    let n = p.rows();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut a = p.transpose();
    for i in 0..n {
        let v = a.get(i, i) - 1.0;
        a.set(i, i, v);
    }
    for j in 0..n {
        a.set(n - 1, j, 1.0);
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let x = lu_factor(&a, context)?.solve_vec(&b);
    // Residual check in l1; failure signals a defective or reducible kernel.
    let xp = p.vecmat(&x);
    let resid: f64 = xp.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
    if !resid.is_finite() || resid > 1e-8 {
        return Err(Mg1Error::SingularMatrix(format!(
            "{context}: stationary residual {resid:.3e}"
        )));
    }
    Ok(x)
}

/// LU without pivoting for matrices whose nonzero pattern below the diagonal
/// is confined to a band of width `lbw`. Intended for the `I - Q` systems of
/// substochastic kernels, where pivot-free elimination is stable.
pub struct BandedLu {
    n: usize,
    lbw: usize,
    lu: Matrix,
}

pub fn banded_lu_factor(mut a: Matrix, lbw: usize, context: &str) -> Result<BandedLu> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let scale = a.max_abs().max(1e-300);
    for col in 0..n {
        let d = a.get(col, col);
        if d.abs() < 1e-14 * scale {
            return Err(Mg1Error::SingularMatrix(context.to_string()));
        }
        let hi = (col + lbw).min(n - 1);
        for r in col + 1..=hi {
            let f = a.get(r, col) / d;
            a.set(r, col, f);
            if f == 0.0 {
                continue;
            }
            // Split borrow: pivot row is fully above row r.
            let (top, bottom) = a.data.split_at_mut(r * n);
            let prow = &top[col * n..(col + 1) * n];
            let rrow = &mut bottom[..n];
            for j in col + 1..n {
                rrow[j] -= f * prow[j];
            }
        }
    }
    Ok(BandedLu { n, lbw, lu: a })
}

impl BandedLu {
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for i in 1..self.n {
            let lo = i.saturating_sub(self.lbw);
            let mut acc = x[i];
            for j in lo..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in i + 1..self.n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        x
    }
}

/// Spectral radius estimate for a nonnegative matrix by power iteration.
pub fn spectral_radius_nonneg(m: &Matrix, max_iter: usize, tol: f64) -> f64 {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = m.matvec(&x);
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            return 0.0;
        }
        let new_lambda = norm; // since x is l1-normalized and everything is >= 0
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (new_lambda - lambda).abs() < tol * new_lambda.max(1.0) {
            return new_lambda;
        }
        lambda = new_lambda;
    }
    lambda
}

/// Strong connectivity of the support graph of a square nonnegative matrix:
/// every node reaches node 0 and node 0 reaches every node.
pub fn strongly_connected(m: &Matrix) -> bool {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let fwd = reach_from_zero(m, false);
    let bwd = reach_from_zero(m, true);
    fwd.iter().all(|&b| b) && bwd.iter().all(|&b| b)
}

fn reach_from_zero(m: &Matrix, reversed: bool) -> Vec<bool> {
    let n = m.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let w = if reversed { m.get(v, u) } else { m.get(u, v) };
            if w > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve(&a, &[5.0, 10.0], "test").unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lu_detects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(lu_factor(&a, "test").is_err());
    }

    #[test]
    fn stationary_of_two_state_swap() {
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pi = stationary_row_vector(&p, "test").unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14);
        assert!((pi[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stationary_of_single_state() {
        let p = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(stationary_row_vector(&p, "test").unwrap(), vec![1.0]);
    }

    #[test]
    fn banded_matches_dense_lu() {
        // Lower bandwidth 1, random-ish diagonally dominant entries.
        let a = Matrix::from_rows(&[
            vec![2.0, -0.3, 0.1, 0.4],
            vec![-0.5, 2.5, -0.2, 0.3],
            vec![0.0, -0.4, 3.0, -0.6],
            vec![0.0, 0.0, -0.7, 2.2],
        ])
        .unwrap();
        let b = [1.0, 2.0, 3.0, 4.0];
        let dense = solve(&a, &b, "test").unwrap();
        let banded = banded_lu_factor(a, 1, "test").unwrap().solve_vec(&b);
        for (x, y) in dense.iter().zip(&banded) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn power_iteration_finds_radius() {
        let m = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.25]]).unwrap();
        // Eigenvalues 0.75 and 0.
        let r = spectral_radius_nonneg(&m, 500, 1e-12);
        assert!((r - 0.75).abs() < 1e-9);
    }

    #[test]
    fn connectivity_detects_absorbing_state() {
        let m = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(!strongly_connected(&m));
        let c = Matrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!(strongly_connected(&c));
    }
}
