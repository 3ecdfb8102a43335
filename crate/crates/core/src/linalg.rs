//! Minimal sparse/dense linear algebra.
//!
//! The discrete systems assembled in this crate are small and symmetric
//! positive definite, so a compressed sparse row matrix, a Jacobi
//! preconditioned conjugate gradient solver, a dense LU / Cholesky kernel
//! and a one-sided Jacobi SVD cover everything the rest of the crate needs.

use thiserror::Error;

use crate::scalar::{cast, Scalar};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual})")]
    CgDidNotConverge { iterations: usize, residual: f64 },
    #[error("NaN detected during conjugate gradient iteration {0}")]
    CgNan(usize),
    #[error("singular matrix: pivot {pivot} below tolerance at column {column}")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix is not positive definite (Cholesky pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
}

/// Sparse matrix in compressed sparse row format.
///
/// Column indices are strictly increasing within each row and duplicates
/// are merged at construction.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        for &(i, j, _) in triplets {
            assert!(i < rows && j < cols, "triplet index out of range");
        }
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut counts = vec![0usize; rows];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut k = 0usize;
        while k < sorted.len() {
            let (i, j, mut v) = sorted[k];
            let mut m = k + 1;
            while m < sorted.len() && sorted[m].0 == i && sorted[m].1 == j {
                v += sorted[m].2;
                m += 1;
            }
            counts[i] += 1;
            col_indices.push(j);
            values.push(v);
            k = m;
        }
        let mut row_offsets = vec![0usize; rows + 1];
        for i in 0..rows {
            row_offsets[i + 1] = row_offsets[i] + counts[i];
        }
        Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry (i, j), zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        match self.col_indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => T::zero(),
        }
    }

    /// Iterate over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// y = A x.
    pub fn spmv(&self, x: &[T]) -> Vec<T> {
        assert_eq!(
            x.len(),
            self.cols,
            "spmv: vector length {} does not match {} columns",
            x.len(),
            self.cols
        );
        let mut y = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::zero();
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[i] = acc;
        }
        y
    }

    /// Main diagonal as a vector (zero where not stored).
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Check value symmetry up to a relative tolerance.
    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self
            .values
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::one());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                if (v - self.get(j, i)).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Dense copy, for desk-scale eigen/SVD computations.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.set(i, j, v);
            }
        }
        out
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Jacobi (diagonal) preconditioned conjugate gradients for SPD systems.
///
/// Terminates when ‖b − Ax‖₂ ≤ rel_tol·‖b‖₂. `b = 0` returns the zero
/// vector without iterating.
pub fn cg_solve<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    rel_tol: T,
    max_iter: usize,
) -> Result<Vec<T>, LinalgError> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "cg_solve: matrix {}x{}, rhs length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == T::zero() {
        return Ok(vec![T::zero(); n]);
    }

    let diag = a.diagonal();
    let inv_diag: Vec<T> = diag
        .iter()
        .map(|&d| if d != T::zero() { T::one() / d } else { T::one() })
        .collect();

    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for iter in 0..max_iter {
        if norm2(&r) <= rel_tol * b_norm {
            return Ok(x);
        }
        let ap = a.spmv(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= T::zero() {
            return Err(LinalgError::CgNan(iter));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::CgNan(iter));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm2(&r) <= rel_tol * b_norm {
        return Ok(x);
    }
    Err(LinalgError::CgDidNotConverge {
        iterations: max_iter,
        residual: (norm2(&r) / b_norm).to_f64().unwrap_or(f64::NAN),
    })
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row_slice(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row_slice(i), x)).collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Lower Cholesky factor L with A = L Lᵀ.
    pub fn cholesky(&self) -> Result<DenseMatrix<T>, LinalgError> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                let ljk = l.get(j, k);
                d -= ljk * ljk;
            }
            if d <= T::zero() || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite {
                    column: j,
                    pivot: d.to_f64().unwrap_or(f64::NAN),
                });
            }
            let dj = d.sqrt();
            l.set(j, j, dj);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / dj);
            }
        }
        Ok(l)
    }
}

/// Solve A x = b by LU factorization with partial pivoting.
pub fn dense_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "dense_solve: matrix {}x{}, rhs length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let scale = lu.max_abs().max(T::one());
    let tol = cast::<T>(1e-14) * scale;

    for col in 0..n {
        // pivot
        let mut piv = col;
        let mut max = lu.get(col, col).abs();
        for r in col + 1..n {
            let v = lu.get(r, col).abs();
            if v > max {
                max = v;
                piv = r;
            }
        }
        if max < tol {
            return Err(LinalgError::Singular {
                column: col,
                pivot: max.to_f64().unwrap_or(f64::NAN),
            });
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu.get(col, j);
                lu.set(col, j, lu.get(piv, j));
                lu.set(piv, j, tmp);
            }
            x.swap(col, piv);
        }
        let d = lu.get(col, col);
        for r in col + 1..n {
            let f = lu.get(r, col) / d;
            if f == T::zero() {
                continue;
            }
            lu.set(r, col, f);
            for j in col + 1..n {
                let v = lu.get(r, j) - f * lu.get(col, j);
                lu.set(r, j, v);
            }
            let xc = x[col];
            x[r] -= f * xc;
        }
    }
    // back substitution
    for col in (0..n).rev() {
        x[col] /= lu.get(col, col);
        let xc = x[col];
        for r in 0..col {
            let f = lu.get(r, col);
            x[r] -= f * xc;
        }
    }
    Ok(x)
}

/// Solve L y = b for lower triangular L (forward substitution).
pub fn forward_substitute<T: Scalar>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let v = l.get(i, k) * y[k];
            y[i] -= v;
        }
        y[i] /= l.get(i, i);
    }
    y
}

/// Solve Lᵀ x = b for lower triangular L (back substitution on the transpose).
pub fn back_substitute_transposed<T: Scalar>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let v = l.get(k, i) * x[k];
            x[i] -= v;
        }
        x[i] /= l.get(i, i);
    }
    x
}

/// All singular values of a dense matrix, sorted descending.
///
/// One-sided Jacobi: right rotations orthogonalize the columns; the column
/// norms at convergence are the singular values. Small singular values come
/// out with high relative accuracy, which is what the inf-sup diagnostics
/// need.
pub fn singular_values<T: Scalar>(a: &DenseMatrix<T>) -> Vec<T> {
    // Work on rows of Aᵀ so each rotation touches contiguous memory.
    let mut h = a.transpose();
    let n = h.rows();
    if n == 0 || h.cols() == 0 {
        return Vec::new();
    }
    let eps = T::epsilon() * cast::<T>(4.0);
    let max_sweeps = 60;

    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (mut aii, mut ajj, mut aij) = (T::zero(), T::zero(), T::zero());
                for k in 0..h.cols() {
                    let hi = h.get(i, k);
                    let hj = h.get(j, k);
                    aii += hi * hi;
                    ajj += hj * hj;
                    aij += hi * hj;
                }
                if aij.abs() <= eps * (aii * ajj).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (ajj - aii) / (cast::<T>(2.0) * aij);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..h.cols() {
                    let hi = h.get(i, k);
                    let hj = h.get(j, k);
                    h.set(i, k, c * hi - s * hj);
                    h.set(j, k, s * hi + c * hj);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<T> = (0..n)
        .map(|i| dot(h.row_slice(i), h.row_slice(i)).sqrt())
        .collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sigma
}

/// Smallest generalized singular value of B with respect to SPD norm
/// matrices NX (trial) and NY (test):
///
///   min over v of max over w of (wᵀ B v) / (‖w‖_NY ‖v‖_NX)
///
/// computed as σ_min of L_Y⁻¹ B L_X⁻ᵀ where NX = L_X L_Xᵀ, NY = L_Y L_Yᵀ.
pub fn min_generalized_singular_value<T: Scalar>(
    b: &DenseMatrix<T>,
    nx: &DenseMatrix<T>,
    ny: &DenseMatrix<T>,
) -> Result<T, LinalgError> {
    if b.rows() != ny.rows() || b.cols() != nx.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "min_generalized_singular_value: B {}x{}, NX {}x{}, NY {}x{}",
            b.rows(),
            b.cols(),
            nx.rows(),
            nx.cols(),
            ny.rows(),
            ny.cols()
        )));
    }
    let lx = nx.cholesky()?;
    let ly = ny.cholesky()?;

    // W = B L_X⁻ᵀ: row i solves L_X wᵢ = bᵢ.
    let mut w = DenseMatrix::zeros(b.rows(), b.cols());
    for i in 0..b.rows() {
        let wi = forward_substitute(&lx, b.row_slice(i));
        for j in 0..b.cols() {
            w.set(i, j, wi[j]);
        }
    }
    // G = L_Y⁻¹ W: column j solves L_Y gⱼ = wⱼ.
    let mut g = DenseMatrix::zeros(w.rows(), w.cols());
    for j in 0..w.cols() {
        let col: Vec<T> = (0..w.rows()).map(|i| w.get(i, j)).collect();
        let gj = forward_substitute(&ly, &col);
        for i in 0..w.rows() {
            g.set(i, j, gj[i]);
        }
    }

    let sigma = singular_values(&g);
    Ok(sigma.last().copied().unwrap_or(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr_identity(n: usize) -> CsrMatrix<f64> {
        let t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        CsrMatrix::from_triplets(n, n, &t)
    }

    /// Interior stiffness of the uniform unit-interval mesh with n cells:
    /// (1/h)·tridiag(−1, 2, −1) on n−1 interior nodes.
    fn poisson_1d(n: usize) -> CsrMatrix<f64> {
        let h = 1.0 / n as f64;
        let m = n - 1;
        let mut t = Vec::new();
        for i in 0..m {
            t.push((i, i, 2.0 / h));
            if i + 1 < m {
                t.push((i, i + 1, -1.0 / h));
                t.push((i + 1, i, -1.0 / h));
            }
        }
        CsrMatrix::from_triplets(m, m, &t)
    }

    #[test]
    fn spmv_identity_and_zero() {
        let a = csr_identity(5);
        let x = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(a.spmv(&x), x);

        let z = CsrMatrix::<f64>::from_triplets(3, 4, &[]);
        assert_eq!(z.spmv(&[1.0, 2.0, 3.0, 4.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn spmv_matches_hand_assembled_stiffness_action() {
        // n = 4, interior values of x(1-x) at 0.25, 0.5, 0.75
        let a = poisson_1d(4);
        let x = vec![0.1875, 0.25, 0.1875];
        let y = a.spmv(&x);
        // hand computation with h = 0.25: (2*0.1875 - 0.25)/0.25 = 0.5, etc.
        let expect = [0.5, 0.5, 0.5];
        for (yi, ei) in y.iter().zip(expect.iter()) {
            assert!((yi - ei).abs() < 1e-14, "{yi} vs {ei}");
        }
    }

    #[test]
    fn from_triplets_merges_duplicates_and_sorts() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 0, 2.0), (0, 1, 0.5), (1, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn cg_diagonal_system() {
        let t: Vec<(usize, usize, f64)> = (0..6).map(|i| (i, i, 2.0)).collect();
        let a = CsrMatrix::from_triplets(6, 6, &t);
        let b = vec![2.0; 6];
        let x = cg_solve(&a, &b, 1e-12, 100).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_zero_rhs_returns_zero_without_iterating() {
        let a = poisson_1d(8);
        let x = cg_solve(&a, &vec![0.0; 7], 1e-12, 0).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cg_matches_dense_solve_on_poisson_load() {
        // rhs from f = pi^2 sin(pi x), consistent load approximated nodally
        let n = 8;
        let h = 1.0 / n as f64;
        let a = poisson_1d(n);
        let b: Vec<f64> = (1..n)
            .map(|i| {
                let x = i as f64 * h;
                std::f64::consts::PI.powi(2) * (std::f64::consts::PI * x).sin() * h
            })
            .collect();
        let x_cg = cg_solve(&a, &b, 1e-12, 1000).unwrap();
        let x_dense = dense_solve(&a.to_dense(), &b).unwrap();
        for (u, v) in x_cg.iter().zip(&x_dense) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = poisson_1d(64);
        let b = vec![1.0; 63];
        let err = cg_solve(&a, &b, 1e-14, 2).unwrap_err();
        match err {
            LinalgError::CgDidNotConverge { iterations, residual } => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn dense_solve_small_cases() {
        let i3 = DenseMatrix::identity(3);
        let b = vec![1.0, 2.0, 3.0];
        assert_eq!(dense_solve(&i3, &b).unwrap(), b);

        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x: Vec<f64> = dense_solve(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dense_solve_random_residual() {
        use crate::rng::SplitMix64;
        let mut rng = SplitMix64::new(42);
        let n = 10;
        let mut rows = Vec::new();
        for _ in 0..n {
            rows.push(rng.uniform_vec(n, -1.0, 1.0));
        }
        // diagonal dominance keeps it comfortably nonsingular
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] += 4.0;
        }
        let a = DenseMatrix::from_rows(&rows);
        let b = rng.uniform_vec(n, -1.0, 1.0);
        let x: Vec<f64> = dense_solve(&a, &b).unwrap();
        let r: Vec<f64> = a
            .matvec(&x)
            .iter()
            .zip(&b)
            .map(|(ax, bi)| (ax - bi).abs())
            .collect();
        assert!(r.iter().all(|&v| v < 1e-10));
    }

    #[test]
    fn dense_solve_detects_singularity() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            dense_solve(&a, &[1.0, 2.0]),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn singular_values_of_diagonal() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![3.0, 0.0], vec![0.0, -2.0]]);
        let s = singular_values(&a);
        assert!((s[0] - 3.0).abs() < 1e-13);
        assert!((s[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn min_gsv_identity_and_diagonal() {
        let i2 = DenseMatrix::<f64>::identity(2);
        let v = min_generalized_singular_value(&i2, &i2, &i2).unwrap();
        assert!((v - 1.0).abs() < 1e-13);

        let b = DenseMatrix::<f64>::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let v = min_generalized_singular_value(&b, &i2, &i2).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn min_gsv_scaling_identity() {
        // sigma(c B, a NX, b NY) = c sigma / (sqrt(a) sqrt(b))
        let n = 2;
        let mut b = DenseMatrix::<f64>::identity(n);
        for i in 0..n {
            b.set(i, i, 4.0);
        }
        let mut nx = DenseMatrix::identity(n);
        let mut ny = DenseMatrix::identity(n);
        for i in 0..n {
            nx.set(i, i, 4.0);
            ny.set(i, i, 4.0);
        }
        let v = min_generalized_singular_value(&b, &nx, &ny).unwrap();
        assert!((v - 1.0).abs() < 1e-13, "expected 4/(2*2) = 1, got {v}");
    }

    #[test]
    fn min_gsv_invariant_under_ny_orthogonal_rotation() {
        use crate::rng::SplitMix64;
        let mut rng = SplitMix64::new(3);
        let n = 4;
        let mut rows = Vec::new();
        for _ in 0..n {
            rows.push(rng.uniform_vec(n, -1.0, 1.0));
        }
        let b = DenseMatrix::<f64>::from_rows(&rows);
        let nx = DenseMatrix::identity(n);
        let ny = DenseMatrix::identity(n);
        let v0 = min_generalized_singular_value(&b, &nx, &ny).unwrap();

        // NY = I, so NY-orthogonal means plain orthogonal; use a Givens rotation.
        let (c, s) = (0.6, 0.8);
        let mut q = DenseMatrix::identity(n);
        q.set(0, 0, c);
        q.set(0, 1, -s);
        q.set(1, 0, s);
        q.set(1, 1, c);
        let qb = q.matmul(&b);
        let v1 = min_generalized_singular_value(&qb, &nx, &ny).unwrap();
        assert!((v0 - v1).abs() <= 1e-10 * v0.max(1.0));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            a.cholesky(),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn spmv_distributes_over_addition(
            xs in proptest::collection::vec(-10.0f64..10.0, 7),
            ys in proptest::collection::vec(-10.0f64..10.0, 7),
        ) {
            // 1D interior stiffness, n = 8
            let h = 1.0 / 8.0;
            let mut t = Vec::new();
            for i in 0..7usize {
                t.push((i, i, 2.0 / h));
                if i + 1 < 7 {
                    t.push((i, i + 1, -1.0 / h));
                    t.push((i + 1, i, -1.0 / h));
                }
            }
            let a = CsrMatrix::from_triplets(7, 7, &t);
            let sum: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x + y).collect();
            let lhs = a.spmv(&sum);
            let ax = a.spmv(&xs);
            let ay = a.spmv(&ys);
            for i in 0..7 {
                let rhs = ax[i] + ay[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
