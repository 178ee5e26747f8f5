//! Sparse matrix helpers and the symmetric positive definite direct solver.
//!
//! Matrices are stored as [`CsrMatrix`]; factorization is delegated to faer's
//! supernodal sparse Cholesky with a fill-reducing ordering.

use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Builds a CSR matrix from `(row, col, value)` triplets, summing duplicates.
pub fn csr_from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> CsrMatrix<f64>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    let mut coo = CooMatrix::new(nrows, ncols);
    for (i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

/// Iterates the stored entries of a CSR matrix as `(row, col, value)`.
pub fn entries(m: &CsrMatrix<f64>) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    m.triplet_iter().map(|(i, j, v)| (i, j, *v))
}

/// `y = A x`.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64]) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    spmv_add(a, x, 1.0, y.as_mut_slice());
    y
}

/// `y += scale * A x`.
pub fn spmv_add(a: &CsrMatrix<f64>, x: &[f64], scale: f64, y: &mut [f64]) {
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(a.nrows(), y.len());
    for (i, row) in a.row_iter().enumerate() {
        let mut acc = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            acc += v * x[j];
        }
        y[i] += scale * acc;
    }
}

/// `A^T x`.
pub fn spmv_transpose(a: &CsrMatrix<f64>, x: &[f64]) -> DVector<f64> {
    let mut y = DVector::zeros(a.ncols());
    for (i, row) in a.row_iter().enumerate() {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            y[j] += v * xi;
        }
    }
    y
}

/// Dense product `A B` for sparse `A` and dense `B`.
pub fn sp_dense(a: &CsrMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for c in 0..b.ncols() {
        let col = b.column(c);
        let y = spmv(a, col.as_slice());
        out.set_column(c, &y);
    }
    out
}

/// Dense product `B^T A` for sparse `A` and dense `B` (rows of `B` index rows of `A`).
pub fn dense_t_sp(b: &DMatrix<f64>, a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(b.ncols(), a.ncols());
    for c in 0..b.ncols() {
        let y = spmv_transpose(a, b.column(c).as_slice());
        out.row_mut(c).copy_from(&y.transpose());
    }
    out
}

/// Extracts the sub-block `rows x cols` of `m` as a new CSR matrix.
pub fn block(
    m: &CsrMatrix<f64>,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> CsrMatrix<f64> {
    let trips = rows.clone().flat_map(|i| {
        let row = m.row(i);
        let (c0, c1) = (cols.start, cols.end);
        let r0 = rows.start;
        row.col_indices()
            .iter()
            .zip(row.values())
            .filter(move |(&j, _)| j >= c0 && j < c1)
            .map(move |(&j, &v)| (i - r0, j - c0, v))
            .collect::<Vec<_>>()
    });
    csr_from_triplets(rows.len(), cols.len(), trips)
}

/// Adds `scale * b` to `a` (same shape).
pub fn add_scaled(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, scale: f64) -> CsrMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    csr_from_triplets(
        a.nrows(),
        a.ncols(),
        entries(a).chain(entries(b).map(|(i, j, v)| (i, j, scale * v))),
    )
}

/// Converts to a dense matrix. Intended for small matrices and tests.
pub fn to_dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in entries(m) {
        d[(i, j)] += v;
    }
    d
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>) -> f64 {
    let diff = add_scaled(a, b, -1.0);
    diff.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Largest absolute stored entry.
pub fn max_abs(a: &CsrMatrix<f64>) -> f64 {
    a.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdSolver {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver").field("n", &self.n).finish()
    }
}

impl SpdSolver {
    /// Factors `m`, reading only its lower triangle.
    pub fn factor(m: &CsrMatrix<f64>, context: &str) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{context}: matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let trips: Vec<Triplet<usize, usize, f64>> = entries(m)
            .filter(|(i, j, _)| i >= j)
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| {
            Error::DimensionMismatch(format!("{context}: cannot build sparse matrix: {e:?}"))
        })?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite {
                context: format!("{context}: {e:?}"),
            })?;
        Ok(Self { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> DVector<f64> {
        use faer::prelude::Solve;
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.llt.solve(&rhs);
        DVector::from_iterator(self.n, x.iter().copied())
    }

    /// Solves `A X = B` column by column.
    pub fn solve_many(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let x = self.solve(b.column(c).as_slice());
            out.set_column(c, &x);
        }
        out
    }
}

/// Solves `A x = b` for SPD `A` with iterative refinement, returning the solution
/// and the achieved relative residual `|b - A x| / |b|`.
pub fn solve_refined(
    a: &CsrMatrix<f64>,
    b: &DVector<f64>,
    tolerance: f64,
    context: &str,
) -> Result<(DVector<f64>, f64)> {
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((DVector::zeros(b.len()), 0.0));
    }
    let solver = SpdSolver::factor(a, context)?;
    let mut x = solver.solve(b.as_slice());
    let mut rel = f64::INFINITY;
    for _ in 0..3 {
        let mut r = b.clone();
        spmv_add(a, x.as_slice(), -1.0, r.as_mut_slice());
        rel = r.norm() / bnorm;
        if rel <= tolerance * 1e-2 {
            break;
        }
        x += solver.solve(r.as_slice());
    }
    if rel > tolerance {
        // last correction may have improved things; recompute once
        let mut r = b.clone();
        spmv_add(a, x.as_slice(), -1.0, r.as_mut_slice());
        rel = r.norm() / bnorm;
    }
    if rel > tolerance || !rel.is_finite() {
        return Err(Error::SolverAccuracy {
            residual: rel,
            tolerance,
        });
    }
    Ok((x, rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        csr_from_triplets(n, n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = csr_from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.5), (1, 0, -1.0)]);
        let d = to_dense(&m);
        assert_eq!(d[(0, 0)], 3.5);
        assert_eq!(d[(1, 0)], -1.0);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplace_1d(50);
        let b = DVector::from_fn(50, |i, _| (i as f64 * 0.3).sin());
        let (x, rel) = solve_refined(&a, &b, 1e-12, "test").unwrap();
        assert!(rel < 1e-12);
        let ax = spmv(&a, x.as_slice());
        assert!((ax - b).norm() < 1e-10);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = csr_from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(
            SpdSolver::factor(&a, "indef"),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn block_extraction() {
        let a = laplace_1d(5);
        let b = block(&a, 1..3, 2..5);
        let d = to_dense(&b);
        assert_eq!(d.shape(), (2, 3));
        assert_eq!(d[(0, 0)], -1.0);
        assert_eq!(d[(1, 0)], 2.0);
        assert_eq!(d[(1, 1)], -1.0);
    }
}
