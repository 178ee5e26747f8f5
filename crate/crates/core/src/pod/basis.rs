//! Weighted POD bases: SVD and method-of-snapshots routes, energy truncation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod::Block;
use crate::weight::Weight;

/// Eigenvalues below this fraction of the largest are discarded by the method of snapshots.
pub const SNAPSHOT_CUTOFF: f64 = 1e-14;

/// W-orthonormal POD modes and their eigenvalues.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// Modes as columns.
    pub modes: DMatrix<f64>,
    /// Eigenvalues `λ_1 ≥ λ_2 ≥ … > 0` of the retained modes.
    pub eigenvalues: Vec<f64>,
    /// `trace(Aᵀ W A)`.
    pub total_energy: f64,
    pub block: Option<Block>,
    pub weight: String,
}

/// Serializable summary of a basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSummary {
    pub rows: usize,
    pub modes: usize,
    pub total_energy: f64,
    pub eigenvalues: Vec<f64>,
}

impl PodBasis {
    pub fn len(&self) -> usize {
        self.modes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows(&self) -> usize {
        self.modes.nrows()
    }

    /// The identity basis of dimension `n` (every dof kept).
    pub fn identity(n: usize) -> Self {
        Self {
            modes: DMatrix::identity(n, n),
            eigenvalues: vec![1.0; n],
            total_energy: n as f64,
            block: None,
            weight: "identity".into(),
        }
    }

    pub fn with_block(mut self, b: Block) -> Self {
        self.block = Some(b);
        self
    }

    /// `Σ_{i>n} λ_i` by the trace identity.
    pub fn tail_energy(&self, n: usize) -> f64 {
        let kept: f64 = self.eigenvalues.iter().take(n).sum();
        (self.total_energy - kept).max(0.0)
    }

    /// Eigenvalues divided by the largest one.
    pub fn normalized_eigenvalues(&self) -> Vec<f64> {
        let l1 = self.eigenvalues.first().copied().unwrap_or(1.0);
        self.eigenvalues.iter().map(|l| l / l1).collect()
    }

    /// Projection `Ψ Ψᵀ W a`.
    pub fn project(&self, w: &Weight, a: &DVector<f64>) -> DVector<f64> {
        let wa = w.apply(a);
        &self.modes * (self.modes.transpose() * wa)
    }

    /// `Σ_k ‖a_k − Ψ_{1..n} Ψ_{1..n}ᵀ W a_k‖²_W`.
    pub fn projection_error(&self, w: &Weight, snapshots: &DMatrix<f64>, n: usize) -> f64 {
        let psi = self.modes.columns(0, n.min(self.len()));
        let wa = w.apply_mat(snapshots);
        let coeff = psi.transpose() * wa;
        let r = snapshots - psi * coeff;
        let wr = w.apply_mat(&r);
        r.component_mul(&wr).sum()
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            rows: self.rows(),
            modes: self.len(),
            total_energy: self.total_energy,
            eigenvalues: self.eigenvalues.clone(),
        }
    }
}

fn total_energy(a: &DMatrix<f64>, w: &Weight) -> f64 {
    a.component_mul(&w.apply_mat(a)).sum()
}

fn check_nonzero(a: &DMatrix<f64>) -> Result<()> {
    if a.ncols() == 0 || a.iter().all(|&x| x == 0.0) {
        return Err(Error::EmptyPod);
    }
    Ok(())
}

/// POD through an SVD of `Lᵀ A`, `W = L Lᵀ`; modes are `L⁻ᵀ U` and `λ = σ²`.
pub fn pod_svd(a: &DMatrix<f64>, w: &Weight) -> Result<PodBasis> {
    check_nonzero(a)?;
    let n = a.nrows();
    let factor = w.cholesky_factor(n)?;
    let b = match &factor {
        None => a.clone(),
        Some(l) => l.transpose() * a,
    };
    // thin QR first so the SVD works on a small square factor
    let (q, r) = if b.nrows() >= b.ncols() {
        let qr = b.qr();
        (qr.q(), qr.r())
    } else {
        (DMatrix::identity(b.nrows(), b.nrows()), b.clone())
    };
    let svd = r.svd(true, false);
    let u_small = svd.u.ok_or(Error::EmptyPod)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s1 = svd.singular_values[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| {
            let s = svd.singular_values[i];
            s > 0.0 && s * s > SNAPSHOT_CUTOFF * 1e-2 * s1 * s1
        })
        .collect();
    let mut u = DMatrix::zeros(n, keep.len());
    let mut lambda = Vec::with_capacity(keep.len());
    for (c, &i) in keep.iter().enumerate() {
        u.set_column(c, &(&q * u_small.column(i)));
        lambda.push(svd.singular_values[i].powi(2));
    }
    let modes = match &factor {
        None => u,
        Some(l) => l
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::NotPositiveDefinite {
                context: "weight factor".into(),
            })?,
    };
    Ok(PodBasis {
        modes,
        eigenvalues: lambda,
        total_energy: total_energy(a, w),
        block: None,
        weight: w.describe(),
    })
}

/// POD through the `|K| × |K|` Gramian `Aᵀ W A v = λ v`, `ψ = A v / √λ`.
pub fn pod_snapshot_method(a: &DMatrix<f64>, w: &Weight) -> Result<PodBasis> {
    snapshot_pod(a, w, None)
}

/// Same as truncating [`pod_snapshot_method`] at `eps_rel`, without forming the
/// discarded modes.
pub fn pod_snapshot_truncated(a: &DMatrix<f64>, w: &Weight, eps_rel: f64) -> Result<PodBasis> {
    check_eps_rel(eps_rel)?;
    snapshot_pod(a, w, Some(eps_rel))
}

fn snapshot_pod(a: &DMatrix<f64>, w: &Weight, eps_rel: Option<f64>) -> Result<PodBasis> {
    check_nonzero(a)?;
    let wa = w.apply_mat(a);
    let mut gram = a.transpose() * &wa;
    gram = (&gram + gram.transpose()) * 0.5;
    let total_energy = wa.component_mul(a).sum();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let l1 = eig.eigenvalues[order[0]];
    let mut keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > SNAPSHOT_CUTOFF * l1)
        .collect();
    if let Some(eps) = eps_rel {
        let values: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
        keep.truncate(energy_count(&values, total_energy, eps));
    }
    let mut modes = DMatrix::zeros(a.nrows(), keep.len());
    let mut lambda = Vec::with_capacity(keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let l = eig.eigenvalues[i];
        modes.set_column(c, &(a * eig.eigenvectors.column(i) / l.sqrt()));
        lambda.push(l);
    }
    reorthonormalize(&mut modes, w);
    Ok(PodBasis {
        modes,
        eigenvalues: lambda,
        total_energy,
        block: None,
        weight: w.describe(),
    })
}

/// Two passes of modified Gram–Schmidt in the W inner product. Modes with tiny
/// eigenvalues lose orthogonality in the method of snapshots; this restores it
/// without changing the leading subspaces.
fn reorthonormalize(modes: &mut DMatrix<f64>, w: &Weight) {
    for _ in 0..2 {
        for c in 0..modes.ncols() {
            let mut v = modes.column(c).into_owned();
            for p in 0..c {
                let q = modes.column(p).into_owned();
                let h = w.inner(&q, &v);
                v.axpy(-h, &q, 1.0);
            }
            let nv = w.norm(&v);
            modes.set_column(c, &(v / nv));
        }
    }
}

/// Smallest `n` with `Σ_{i≤n} λ_i / trace ≥ eps_rel`.
pub fn truncation_size(basis: &PodBasis, eps_rel: f64) -> usize {
    energy_count(&basis.eigenvalues, basis.total_energy, eps_rel)
}

fn energy_count(eigenvalues: &[f64], total: f64, eps_rel: f64) -> usize {
    let mut acc = 0.0;
    for (i, l) in eigenvalues.iter().enumerate() {
        acc += l;
        if acc / total >= eps_rel - 1e-12 {
            return i + 1;
        }
    }
    eigenvalues.len()
}

fn check_eps_rel(eps_rel: f64) -> Result<()> {
    if !(eps_rel > 0.0 && eps_rel <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps_rel {eps_rel} outside (0, 1]")));
    }
    Ok(())
}

/// Keeps the leading modes reaching the relative energy `eps_rel`.
pub fn truncate_energy(basis: &PodBasis, eps_rel: f64) -> Result<PodBasis> {
    check_eps_rel(eps_rel)?;
    let n = truncation_size(basis, eps_rel);
    Ok(PodBasis {
        modes: basis.modes.columns(0, n).into_owned(),
        eigenvalues: basis.eigenvalues[..n].to_vec(),
        total_energy: basis.total_energy,
        block: basis.block,
        weight: basis.weight.clone(),
    })
}

/// Largest principal angle (radians) between the column spaces of two
/// W-orthonormal bases.
pub fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &Weight) -> f64 {
    let m = a.transpose() * w.apply_mat(b);
    let s = m.singular_values();
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    // acos is ill-conditioned near 1; use the sine form
    (1.0 - smin * smin).max(0.0).sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(r, c, v)
    }

    #[test]
    fn single_snapshot() {
        let a = mat(2, 1, &[3.0, 4.0]);
        for b in [pod_svd(&a, &Weight::Identity).unwrap(), pod_snapshot_method(&a, &Weight::Identity).unwrap()] {
            assert_eq!(b.len(), 1);
            assert!((b.eigenvalues[0] - 25.0).abs() < 1e-12);
            let s = b.modes[(0, 0)].signum();
            assert!((s * b.modes[(0, 0)] - 0.6).abs() < 1e-15);
            assert!((s * b.modes[(1, 0)] - 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_pair() {
        let a = DMatrix::<f64>::identity(2, 2);
        let b = pod_svd(&a, &Weight::Identity).unwrap();
        assert_eq!(b.eigenvalues, vec![1.0, 1.0]);
        assert!((b.projection_error(&Weight::Identity, &a, 1) - 1.0).abs() < 1e-15);
        assert!((b.tail_energy(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_examples() {
        let basis = PodBasis {
            modes: DMatrix::identity(4, 4),
            eigenvalues: vec![0.9, 0.09, 0.009, 0.001],
            total_energy: 1.0,
            block: None,
            weight: "identity".into(),
        };
        assert_eq!(truncation_size(&basis, 0.99), 2);
        assert_eq!(truncation_size(&basis, 0.9999), 4);
        assert_eq!(truncate_energy(&basis, 0.99).unwrap().len(), 2);
        assert!(truncate_energy(&basis, 0.0).is_err());
        assert!(truncate_energy(&basis, 1.5).is_err());
    }

    #[test]
    fn truncated_snapshot_method_matches_full_then_truncate() {
        let a = DMatrix::from_fn(30, 12, |i, j| ((i + 1) as f64 * 0.37 + j as f64).sin() / (1.0 + j as f64).powi(2));
        for eps in [0.5, 0.99, 0.9999, 1.0] {
            let full = truncate_energy(&pod_snapshot_method(&a, &Weight::Identity).unwrap(), eps).unwrap();
            let fast = pod_snapshot_truncated(&a, &Weight::Identity, eps).unwrap();
            assert_eq!(full.eigenvalues, fast.eigenvalues);
            assert!((&full.modes - &fast.modes).amax() == 0.0);
        }
        assert!(pod_snapshot_truncated(&a, &Weight::Identity, 0.0).is_err());
    }

    #[test]
    fn zero_snapshots_are_rejected() {
        let a = DMatrix::<f64>::zeros(3, 2);
        assert!(matches!(pod_svd(&a, &Weight::Identity), Err(Error::EmptyPod)));
        assert!(matches!(pod_snapshot_method(&a, &Weight::Identity), Err(Error::EmptyPod)));
    }

    #[test]
    fn weighted_modes_are_w_orthonormal() {
        let a = mat(3, 2, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0]);
        let w = Weight::Diagonal(DVector::from_vec(vec![1.0, 4.0, 9.0]));
        for b in [pod_svd(&a, &w).unwrap(), pod_snapshot_method(&a, &w).unwrap()] {
            let g = b.modes.transpose() * w.apply_mat(&b.modes);
            assert!((g - DMatrix::identity(2, 2)).amax() < 1e-12);
        }
    }
}
