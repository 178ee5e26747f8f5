//! Evaluates the parametric stiffness and loads for a perturbed tooth and magnet
//! and compares them with direct assembly on the displaced mesh.
//!
//! cargo run --release --example affine_decomposition

use pmsm_rom::fem::{assemble_loads, assemble_stiffness, FemModel};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::sparse::{max_abs, max_abs_diff};

fn main() -> pmsm_rom::Result<()> {
    let mut spec = MachineSpec::coarse();
    let model = FemModel::new(&spec)?;
    let dec = &model.decomposition;
    println!(
        "{} parametric stiffness terms ({} per tooth), {} poles with magnet terms",
        dec.n_parametric_stiffness_terms(),
        dec.terms_per_tooth(0),
        dec.n_poles()
    );

    spec.perturb_tooth(2, 0.3e-3);
    spec.perturb_magnet(1, 5f64.to_radians());
    let params = spec.parameters();
    let sides = dec.evaluate_stiffness(&params)?;
    let loads = dec.evaluate_loads(&params)?;

    let direct_model = FemModel::new(&spec)?;
    let moved = direct_model.perturbed_mesh()?;
    let direct = assemble_stiffness(&moved, &model.partition, &spec)?;
    let direct_loads = assemble_loads(&moved, &model.partition, &spec)?;

    let rel = |a, b| max_abs_diff(a, b) / max_abs(b);
    println!("stator side: max entry difference {:.2e} (relative)", rel(&sides.stator, &direct.stator));
    println!("rotor side:  max entry difference {:.2e} (relative)", rel(&sides.rotor, &direct.rotor));
    println!(
        "magnet load: |f - f_direct| / |f_direct| = {:.2e}",
        (&loads.rotor - &direct_loads.rotor).norm() / direct_loads.rotor.norm()
    );
    Ok(())
}
