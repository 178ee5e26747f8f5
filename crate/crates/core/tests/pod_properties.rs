use nalgebra::{DMatrix, DVector};
use pmsm_rom::fem::{sweep_full, FemModel};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::pod::{largest_principal_angle, pod_snapshot_method, pod_svd, truncation_size, Block, PodBasis, SnapshotSet};
use pmsm_rom::sparse::csr_from_triplets;
use pmsm_rom::weight::Weight;
use proptest::prelude::*;

/// Projection error of every truncation level against the tail eigenvalue sum.
fn worst_identity_gap(basis: &PodBasis, a: &DMatrix<f64>, w: &Weight) -> f64 {
    (0..=basis.len())
        .map(|n| (basis.projection_error(w, a, n) - basis.tail_energy(n)).abs() / basis.total_energy)
        .fold(0.0, f64::max)
}

/// Leading modes with `λ > 1e-8 λ₁`, cut back so that no near-degenerate pair
/// is split between the compared and the discarded part.
fn comparable_modes(lambda: &[f64]) -> usize {
    let mut n = lambda.iter().filter(|&&l| l > 1e-8 * lambda[0]).count();
    while n > 0 && n < lambda.len() && (lambda[n - 1] - lambda[n]) < 1e-3 * lambda[n - 1] {
        n -= 1;
    }
    n
}

struct RouteGap {
    /// Relative eigenvalue deviation over the modes kept at `eps_rel = 0.9999`.
    retained: f64,
    /// Eigenvalue deviation relative to `λ₁` over all compared modes.
    scaled: f64,
    angle: f64,
}

fn compare_routes(a: &DMatrix<f64>, w: &Weight) -> RouteGap {
    let svd = pod_svd(a, w).unwrap();
    let snap = pod_snapshot_method(a, w).unwrap();
    let n = comparable_modes(&svd.eigenvalues).min(snap.len());
    assert!(n > 0);
    let kept = truncation_size(&svd, 0.9999).min(snap.len());
    let dev = |i: usize| (svd.eigenvalues[i] - snap.eigenvalues[i]).abs();
    RouteGap {
        retained: (0..kept).map(|i| dev(i) / svd.eigenvalues[i]).fold(0.0, f64::max),
        scaled: (0..n).map(|i| dev(i) / svd.eigenvalues[0]).fold(0.0, f64::max),
        angle: largest_principal_angle(&svd.modes.columns(0, n).into_owned(), &snap.modes.columns(0, n).into_owned(), w),
    }
}

fn assert_routes_agree(g: &RouteGap, what: &str) {
    assert!(g.retained <= 1e-10, "{what}: retained spectrum {:e}", g.retained);
    assert!(g.scaled <= 1e-10, "{what}: spectrum {:e}", g.scaled);
    assert!(g.angle < 1e-6, "{what}: angle {:e}", g.angle);
}

fn weights(n: usize, diag: &[f64]) -> Vec<Weight> {
    let d = DVector::from_iterator(n, diag.iter().cycle().take(n).copied());
    // tridiagonal SPD weight, diagonally dominant
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 3.0 + d[i]));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    vec![Weight::Identity, Weight::Diagonal(d), Weight::sparse(csr_from_triplets(n, n, t))]
}

fn matrix_strategy() -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    (4usize..40, 1usize..12).prop_flat_map(|(r, c)| {
        (
            proptest::collection::vec(-1.0f64..1.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v)),
            proptest::collection::vec(0.1f64..10.0, 1..8),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_identity_on_random_matrices((a, diag) in matrix_strategy()) {
        for w in weights(a.nrows(), &diag) {
            for b in [pod_svd(&a, &w).unwrap(), pod_snapshot_method(&a, &w).unwrap()] {
                let g = worst_identity_gap(&b, &a, &w);
                prop_assert!(g <= 1e-8, "gap {g:e} with {}", w.describe());
            }
        }
    }

    #[test]
    fn routes_agree_on_random_matrices((a, diag) in matrix_strategy()) {
        for w in weights(a.nrows(), &diag) {
            let g = compare_routes(&a, &w);
            prop_assert!(g.retained <= 1e-10, "retained spectrum {:e}", g.retained);
            prop_assert!(g.scaled <= 1e-10, "spectrum {:e}", g.scaled);
            prop_assert!(g.angle < 1e-6, "angle {:e}", g.angle);
        }
    }

    #[test]
    fn eigenvalues_are_sorted_and_bounded_by_the_energy((a, _) in matrix_strategy()) {
        let b = pod_svd(&a, &Weight::Identity).unwrap();
        prop_assert!(b.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
        let sum: f64 = b.eigenvalues.iter().sum();
        prop_assert!((sum - b.total_energy).abs() <= 1e-10 * b.total_energy);
    }
}

#[test]
fn rank_deficient_input_keeps_the_identity() {
    // three copies of two independent columns
    let base = DMatrix::from_fn(30, 2, |i, j| ((i + 1) as f64 * (j as f64 + 0.5)).sin());
    let a = DMatrix::from_fn(30, 6, |i, j| base[(i, j % 2)] * (1.0 + j as f64));
    let w = Weight::Identity;
    let b = pod_snapshot_method(&a, &w).unwrap();
    assert_eq!(b.len(), 2);
    assert!(worst_identity_gap(&b, &a, &w) <= 1e-8);
    assert_routes_agree(&compare_routes(&a, &w), "rank two");
}

fn coarse_snapshots(spec: &MachineSpec) -> SnapshotSet {
    let system = FemModel::new(spec).unwrap().system().unwrap();
    let steps: Vec<usize> = (0..system.n_angles()).step_by(3).collect();
    sweep_full(&system, &steps).unwrap().0
}

#[test]
fn error_identity_and_route_agreement_on_machine_snapshots() {
    let mut stat = MachineSpec::coarse();
    stat.perturb_tooth(0, 0.3e-3);
    stat.perturb_magnet(0, 5f64.to_radians());
    for spec in [MachineSpec::coarse(), stat] {
        let set = coarse_snapshots(&spec);
        for block in Block::ALL {
            let a = set.block(block);
            let w = Weight::Identity;
            for b in [pod_svd(&a, &w).unwrap(), pod_snapshot_method(&a, &w).unwrap()] {
                let g = worst_identity_gap(&b, &a, &w);
                assert!(g <= 1e-8, "{}: gap {g:e}", block.name());
            }
            assert_routes_agree(&compare_routes(&a, &w), block.name());
        }
    }
}
