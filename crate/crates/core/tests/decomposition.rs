mod common;

use pmsm_rom::fem::{assemble_loads, assemble_stiffness, FemModel, Parameters};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::mesh::apply_tooth_perturbation;
use pmsm_rom::sparse::{max_abs, max_abs_diff};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest relative deviation between the affine evaluation and direct assembly
/// on the displaced mesh, over both stiffness sides and all load vectors.
fn deviation(model: &FemModel, spec: &MachineSpec) -> f64 {
    let params = spec.parameters();
    let mesh = apply_tooth_perturbation(&model.mesh, spec).unwrap();
    let direct = assemble_stiffness(&mesh, &model.partition, spec).unwrap();
    let eval = model.decomposition.evaluate_stiffness(&params).unwrap();
    let scale = max_abs(&direct.stator).max(max_abs(&direct.rotor));
    let mut dev = max_abs_diff(&eval.stator, &direct.stator).max(max_abs_diff(&eval.rotor, &direct.rotor)) / scale;

    let dl = assemble_loads(&mesh, &model.partition, spec).unwrap();
    let el = model.decomposition.evaluate_loads(&params).unwrap();
    let pairs = [
        (&el.rotor, &dl.rotor),
        (&el.stator_fixed, &dl.stator_fixed),
        (&el.phase[0], &dl.phase[0]),
        (&el.phase[1], &dl.phase[1]),
        (&el.phase[2], &dl.phase[2]),
    ];
    for (e, d) in pairs {
        let s = d.amax();
        if s > 0.0 {
            dev = dev.max((e - d).amax() / s);
        } else {
            assert_eq!(e.amax(), 0.0);
        }
    }
    dev
}

fn random_spec(base: &MachineSpec, rng: &mut ChaCha8Rng) -> MachineSpec {
    let mut s = base.clone();
    let (lo, hi) = s.tooth_offset_bounds();
    for p in 0..s.n_poles {
        s.perturb_magnet(p, rng.random_range(-10.0f64..10.0).to_radians());
    }
    for t in 0..s.n_teeth() {
        s.perturb_tooth(t, rng.random_range(0.9 * lo..0.9 * hi));
    }
    s
}

#[test]
fn affine_evaluation_matches_displaced_mesh() {
    let base = MachineSpec::coarse();
    let model = FemModel::new(&base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut specs = vec![
        common::perturbed(&base, 0, 5f64.to_radians(), 0, 0.3e-3),
        common::perturbed(&base, 3, -5f64.to_radians(), 17, 0.3e-3),
    ];
    while specs.len() < 10 {
        specs.push(random_spec(&base, &mut rng));
    }
    for (i, s) in specs.iter().enumerate() {
        let d = deviation(&model, s);
        assert!(d <= 1e-12, "point {i}: deviation {d:e}");
    }
}

#[test]
fn nominal_parameters_reproduce_the_reference() {
    let base = MachineSpec::coarse();
    let model = FemModel::new(&base).unwrap();
    let nominal = Parameters::nominal(base.n_teeth(), base.n_poles);
    assert_eq!(nominal, base.parameters());
    assert!(deviation(&model, &base) <= 1e-13);
}

#[test]
fn full_system_at_parameters_matches_a_fresh_model() {
    let base = MachineSpec::coarse();
    let model = FemModel::new(&base).unwrap();
    let spec = common::perturbed(&base, 1, 5f64.to_radians(), 4, 0.3e-3);
    let fresh = FemModel::new(&spec).unwrap().system().unwrap();
    let via = model.system_at(&spec.parameters()).unwrap();
    let scale = max_abs(&fresh.stator);
    assert!(max_abs_diff(&via.stator, &fresh.stator) <= 1e-12 * scale);
    assert!(max_abs_diff(&via.rotor, &fresh.rotor) <= 1e-12 * scale);
    assert!((via.rhs(5).unwrap() - fresh.rhs(5).unwrap()).amax() <= 1e-12 * fresh.rhs(5).unwrap().amax());
}
