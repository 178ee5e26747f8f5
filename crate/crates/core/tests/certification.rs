use nalgebra::DMatrix;
use pmsm_rom::certify::{
    certify_sweep, coercivity, residual_norm, smallest_eigenvalues, CertificateConfig, CoercivityPolicy, FastResidual,
};
use pmsm_rom::eigen::dense_generalized_eigenvalues;
use pmsm_rom::fem::{sweep_full, BlockSystem, FemModel};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::pod::{pod_snapshot_method, truncate_energy, Block, ReducedModel, SnapshotSet};
use pmsm_rom::sparse::to_dense;
use pmsm_rom::weight::Weight;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coarse_system(spec: &MachineSpec) -> BlockSystem {
    FemModel::new(spec).unwrap().system().unwrap()
}

fn stat_spec() -> MachineSpec {
    let mut s = MachineSpec::coarse();
    s.perturb_tooth(5, 0.3e-3);
    s
}

#[test]
fn coercivity_matches_dense_eigensolve() {
    let system = coarse_system(&MachineSpec::coarse());
    let k = system.rotated(0).unwrap().matrix;
    let n = k.nrows();
    let dense = dense_generalized_eigenvalues(&to_dense(&k), &DMatrix::identity(n, n)).unwrap();
    let alpha = coercivity(&k, &Weight::Identity, 1e-10).unwrap();
    assert!((alpha - dense[0]).abs() <= 1e-8 * dense[0], "{alpha:e} vs {:e}", dense[0]);
    let five = smallest_eigenvalues(&k, &Weight::Identity, 5, 1e-10).unwrap();
    for (a, b) in five.iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-8 * b, "{a:e} vs {b:e}");
    }
}

#[test]
fn coercivity_does_not_depend_on_the_rotor_angle() {
    let system = coarse_system(&stat_spec());
    let reference = smallest_eigenvalues(&system.rotated(0).unwrap().matrix, &Weight::Identity, 5, 1e-10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..8 {
        let k = rng.random_range(1..system.n_angles());
        let vals = smallest_eigenvalues(&system.rotated(k).unwrap().matrix, &Weight::Identity, 5, 1e-10).unwrap();
        for (a, b) in vals.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-10 * b, "step {k}: {a:e} vs {b:e}");
        }
    }
}

fn small_model(system: &BlockSystem, steps: &[usize]) -> (ReducedModel, SnapshotSet) {
    let (train, _) = sweep_full(system, steps).unwrap();
    let w = Weight::Identity;
    let s = truncate_energy(&pod_snapshot_method(&train.block(Block::Stator), &w).unwrap(), 0.9999).unwrap();
    let r = truncate_energy(&pod_snapshot_method(&train.block(Block::Rotor), &w).unwrap(), 0.9999).unwrap();
    (ReducedModel::project(system, &s, &r).unwrap(), train)
}

#[test]
fn estimator_bounds_the_true_error_at_every_angle() {
    for spec in [MachineSpec::coarse(), stat_spec()] {
        let system = coarse_system(&spec);
        let (model, _) = small_model(&system, &[0, 3, 7, 11]);
        let all: Vec<usize> = (0..system.n_angles()).collect();
        let (truth, _) = sweep_full(&system, &all).unwrap();
        let cfg = CertificateConfig::default();
        let alpha = pmsm_rom::certify::system_coercivity(&system, 0, &cfg).unwrap();
        let report = certify_sweep(&system, &model, alpha, &cfg, Some(&truth)).unwrap();
        let err = report.true_error.clone().unwrap();
        for k in 0..system.n_angles() {
            // the reduced solve is accurate to 1e-10 relative; allow ten times that
            let slack = 1e-9 * cfg.weight.norm(&truth.column_of(k).unwrap());
            assert!(report.delta[k] + slack >= err[k], "step {k}: {:e} < {:e}", report.delta[k], err[k]);
        }
        let (lo, _) = report.effectivity_range().unwrap();
        assert!(lo >= 1.0, "effectivity {lo}");
    }
}

#[test]
fn per_angle_policy_gives_the_same_certificate() {
    let system = coarse_system(&stat_spec());
    let (model, _) = small_model(&system, &[0, 5, 9]);
    let once = CertificateConfig::default();
    let per = CertificateConfig {
        policy: CoercivityPolicy::PerAngle,
        ..CertificateConfig::default()
    };
    let alpha = pmsm_rom::certify::system_coercivity(&system, 0, &once).unwrap();
    let a = certify_sweep(&system, &model, alpha, &once, None).unwrap();
    let b = certify_sweep(&system, &model, alpha, &per, None).unwrap();
    for (x, y) in a.delta.iter().zip(&b.delta) {
        assert!((x - y).abs() <= 1e-9 * x, "{x:e} vs {y:e}");
    }
}

#[test]
fn fast_residual_matches_direct_evaluation() {
    let system = coarse_system(&stat_spec());
    let (model, _) = small_model(&system, &[0, 4, 10, 13]);
    let fast = FastResidual::new(&system, &model, &Weight::Identity).unwrap();
    for k in [0, 1, 17, 50, 99, system.n_angles() - 1] {
        let sol = model.solve(k).unwrap();
        let direct = residual_norm(&system, k, &sol.lifted, &Weight::Identity).unwrap();
        let f = system.rhs(k).unwrap().norm();
        let quick = fast.residual_norm(&system, k, &sol.coefficients).unwrap();
        assert!((quick - direct).abs() <= 1e-9 * f, "step {k}: {quick:e} vs {direct:e}");
    }
}

#[test]
fn full_basis_has_zero_estimate() {
    let system = coarse_system(&MachineSpec::coarse());
    let d = system.dims;
    let model = ReducedModel::from_modes(&system, &DMatrix::identity(d.n_s, d.n_s), &DMatrix::identity(d.n_r, d.n_r)).unwrap();
    let cfg = CertificateConfig::default();
    let alpha = pmsm_rom::certify::system_coercivity(&system, 0, &cfg).unwrap();
    let report = certify_sweep(&system, &model, alpha, &cfg, None).unwrap();
    assert!(report.max_rel() <= 1e-8, "{:e}", report.max_rel());
}
