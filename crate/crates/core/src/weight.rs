//! Inner-product weight `W` for POD and error norms.

use std::ops::Range;
use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::sparse::{block, sp_dense, spmv, to_dense, SpdSolver};

/// Largest block for which a dense Cholesky factor of a sparse weight is formed.
const DENSE_FACTOR_LIMIT: usize = 4000;

/// Symmetric positive definite weight matrix.
#[derive(Debug, Clone, Default)]
pub enum Weight {
    #[default]
    Identity,
    Diagonal(DVector<f64>),
    Sparse(SparseWeight),
}

#[derive(Debug, Clone)]
pub struct SparseWeight {
    pub matrix: CsrMatrix<f64>,
    solver: OnceLock<std::sync::Arc<SpdSolver>>,
}

impl Weight {
    pub fn sparse(matrix: CsrMatrix<f64>) -> Self {
        Weight::Sparse(SparseWeight {
            matrix,
            solver: OnceLock::new(),
        })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Weight::Identity)
    }

    pub fn describe(&self) -> String {
        match self {
            Weight::Identity => "identity".into(),
            Weight::Diagonal(d) => format!("diagonal({})", d.len()),
            Weight::Sparse(s) => format!("sparse({}x{})", s.matrix.nrows(), s.matrix.ncols()),
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        let m = match self {
            Weight::Identity => return Ok(()),
            Weight::Diagonal(d) => d.len(),
            Weight::Sparse(s) => s.matrix.nrows(),
        };
        if m != n {
            return Err(Error::DimensionMismatch(format!("weight of size {m} applied to {n} rows")));
        }
        Ok(())
    }

    /// `W x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Weight::Identity => x.clone(),
            Weight::Diagonal(d) => d.component_mul(x),
            Weight::Sparse(s) => spmv(&s.matrix, x.as_slice()),
        }
    }

    /// `W A`.
    pub fn apply_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity => a.clone(),
            Weight::Diagonal(d) => {
                let mut out = a.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                out
            }
            Weight::Sparse(s) => sp_dense(&s.matrix, a),
        }
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            Weight::Identity => x.dot(y),
            _ => x.dot(&self.apply(y)),
        }
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// `‖r‖_{W⁻¹} = sqrt(rᵀ W⁻¹ r)`.
    pub fn dual_norm(&self, r: &DVector<f64>) -> Result<f64> {
        self.check_len(r.len())?;
        Ok(match self {
            Weight::Identity => r.norm(),
            Weight::Diagonal(d) => r.iter().zip(d.iter()).map(|(x, w)| x * x / w).sum::<f64>().sqrt(),
            Weight::Sparse(s) => {
                let solver = s.solver()?;
                r.dot(&solver.solve(r.as_slice())).max(0.0).sqrt()
            }
        })
    }

    /// `W⁻¹ x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x.len())?;
        Ok(match self {
            Weight::Identity => x.clone(),
            Weight::Diagonal(d) => x.component_div(d),
            Weight::Sparse(s) => s.solver()?.solve(x.as_slice()),
        })
    }

    /// Principal sub-block of the weight for the given rows.
    pub fn restrict(&self, rows: Range<usize>) -> Weight {
        match self {
            Weight::Identity => Weight::Identity,
            Weight::Diagonal(d) => Weight::Diagonal(d.rows_range(rows).into_owned()),
            Weight::Sparse(s) => Weight::sparse(block(&s.matrix, rows.clone(), rows)),
        }
    }

    /// Lower Cholesky factor `L` with `W = L Lᵀ` (`None` for the identity).
    pub fn cholesky_factor(&self, n: usize) -> Result<Option<DMatrix<f64>>> {
        self.check_len(n)?;
        match self {
            Weight::Identity => Ok(None),
            Weight::Diagonal(d) => {
                if d.iter().any(|&x| x <= 0.0) {
                    return Err(Error::NotPositiveDefinite {
                        context: "diagonal weight".into(),
                    });
                }
                Ok(Some(DMatrix::from_diagonal(&d.map(f64::sqrt))))
            }
            Weight::Sparse(s) => {
                if n > DENSE_FACTOR_LIMIT {
                    return Err(Error::InvalidArgument(format!(
                        "dense factor of a {n}x{n} sparse weight; use the method of snapshots"
                    )));
                }
                Cholesky::new(to_dense(&s.matrix))
                    .map(|c| Some(c.l()))
                    .ok_or_else(|| Error::NotPositiveDefinite {
                        context: "weight matrix".into(),
                    })
            }
        }
    }
}

impl SparseWeight {
    fn solver(&self) -> Result<&SpdSolver> {
        if let Some(s) = self.solver.get() {
            return Ok(s);
        }
        let s = std::sync::Arc::new(SpdSolver::factor(&self.matrix, "weight matrix")?);
        Ok(self.solver.get_or_init(|| s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::csr_from_triplets;

    #[test]
    fn norms_agree_across_representations() {
        let d = DVector::from_vec(vec![2.0, 3.0, 5.0]);
        let diag = Weight::Diagonal(d.clone());
        let sp = Weight::sparse(csr_from_triplets(3, 3, (0..3).map(|i| (i, i, d[i]))));
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!((diag.norm(&x) - sp.norm(&x)).abs() < 1e-14);
        assert!((diag.dual_norm(&x).unwrap() - sp.dual_norm(&x).unwrap()).abs() < 1e-14);
        assert_eq!(Weight::Identity.dual_norm(&x).unwrap(), x.norm());
        let l = sp.cholesky_factor(3).unwrap().unwrap();
        assert!((&l * l.transpose() - DMatrix::from_diagonal(&d)).amax() < 1e-14);
    }

    #[test]
    fn restriction_keeps_the_block() {
        let d = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match Weight::Diagonal(d).restrict(1..3) {
            Weight::Diagonal(r) => assert_eq!(r.as_slice(), &[2.0, 3.0]),
            _ => unreachable!(),
        }
    }
}
