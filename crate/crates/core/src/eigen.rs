//! Smallest eigenpairs of `K v = λ W v` by inverse subspace iteration.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{sp_dense, SpdSolver};
use crate::weight::Weight;

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    /// Relative residual `‖K x − θ W x‖ / ‖K x‖` required of every wanted pair.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Extra subspace vectors beyond the wanted count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 1000,
            guard: 6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub iterations: usize,
}

/// Rayleigh–Ritz on the span of `y`: returns ascending Ritz values and W-orthonormal
/// Ritz vectors.
fn rayleigh_ritz(k: &CsrMatrix<f64>, w: &Weight, y: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let ky = sp_dense(k, y);
    let wy = w.apply_mat(y);
    let a = y.transpose() * &ky;
    let b = y.transpose() * &wy;
    let a = (&a + a.transpose()) * 0.5;
    let b = (&b + b.transpose()) * 0.5;
    let l = Cholesky::new(b)
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "subspace Gramian".into(),
        })?
        .l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::NotPositiveDefinite {
        context: "subspace Gramian factor".into(),
    })?;
    let c = &linv * a * linv.transpose();
    let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let z = DMatrix::from_fn(c.nrows(), order.len(), |r, col| eig.eigenvectors[(r, order[col])]);
    let t = linv.transpose() * z;
    let x = y * &t;
    let kx = ky * &t;
    Ok((order.iter().map(|&i| eig.eigenvalues[i]).collect(), x, kx))
}

/// The `count` smallest eigenpairs of the pencil `(K, W)`, `K` and `W` SPD.
pub fn smallest_eigenpairs(k: &CsrMatrix<f64>, w: &Weight, count: usize, cfg: &EigenConfig) -> Result<EigenPairs> {
    let n = k.nrows();
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!("{count} eigenpairs of a {n}x{n} matrix")));
    }
    let p = (count + cfg.guard).min(n);
    let solver = SpdSolver::factor(k, "coercivity eigenproblem")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    let mut change = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let (theta, x, kx) = rayleigh_ritz(k, w, &y)?;
        let wx = w.apply_mat(&x);
        let mut worst = 0.0f64;
        for c in 0..count {
            let r = kx.column(c) - wx.column(c) * theta[c];
            worst = worst.max(r.norm() / kx.column(c).norm());
        }
        change = worst;
        if worst <= cfg.tolerance {
            return Ok(EigenPairs {
                values: theta[..count].to_vec(),
                vectors: x.columns(0, count).into_owned(),
                iterations: it,
            });
        }
        y = solver.solve_many(&wx);
    }
    Err(Error::EigenNonConvergence {
        iterations: cfg.max_iterations,
        change,
    })
}

/// Dense generalized symmetric eigenvalues (ascending) via `W = L Lᵀ`.
pub fn dense_generalized_eigenvalues(k: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = Cholesky::new(w.clone())
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "dense weight".into(),
        })?
        .l();
    let linv = l.try_inverse().ok_or_else(|| Error::NotPositiveDefinite {
        context: "dense weight factor".into(),
    })?;
    let c = &linv * k * linv.transpose();
    let mut v: Vec<f64> = SymmetricEigen::new((&c + c.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::csr_from_triplets;

    #[test]
    fn diagonal_pencil() {
        let k = csr_from_triplets(4, 4, [(0, 0, 5.0), (1, 1, 2.0), (2, 2, 9.0), (3, 3, 3.0)]);
        let e = smallest_eigenpairs(&k, &Weight::Identity, 2, &EigenConfig::default()).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_1d_matches_closed_form() {
        let n = 200;
        let k = csr_from_triplets(
            n,
            n,
            (0..n).flat_map(|i| {
                let mut v = vec![(i, i, 2.0)];
                if i > 0 {
                    v.push((i, i - 1, -1.0));
                }
                if i + 1 < n {
                    v.push((i, i + 1, -1.0));
                }
                v
            }),
        );
        let e = smallest_eigenpairs(&k, &Weight::Identity, 3, &EigenConfig::default()).unwrap();
        for (j, v) in e.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() <= 1e-10 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn generalized_diagonal() {
        let k = csr_from_triplets(2, 2, [(0, 0, 2.0), (1, 1, 5.0)]);
        let w = Weight::Diagonal(nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let e = smallest_eigenpairs(&k, &w, 1, &EigenConfig { guard: 1, ..Default::default() }).unwrap();
        assert!((e.values[0] - 0.5).abs() < 1e-14);
    }
}
