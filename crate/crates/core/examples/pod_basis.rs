//! POD of the stator rows of a full revolution: spectrum, truncation at several
//! energy levels, and the projection error against the discarded energy.
//!
//! cargo run --release --example pod_basis

use pmsm_rom::fem::{sweep_full, FemModel};
use pmsm_rom::io::write_spectrum_csv;
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::pod::{pod_snapshot_method, pod_svd, largest_principal_angle, truncate_energy, Block};
use pmsm_rom::weight::Weight;

fn main() -> pmsm_rom::Result<()> {
    let spec = MachineSpec::coarse();
    let system = FemModel::new(&spec)?.system()?;
    let steps: Vec<usize> = (0..system.n_angles()).collect();
    let (full, _) = sweep_full(&system, &steps)?;
    let a = full.block(Block::Stator);
    let w = Weight::Identity;

    let basis = pod_snapshot_method(&a, &w)?;
    let svd = pod_svd(&a, &w)?;
    println!("{} modes above the cutoff; leading normalized eigenvalues:", basis.len());
    for (i, v) in basis.normalized_eigenvalues().iter().take(8).enumerate() {
        println!("  {:>2}: {v:.3e}", i + 1);
    }
    for eps in [0.99, 0.9999, 0.999999] {
        let t = truncate_energy(&basis, eps)?;
        println!(
            "eps_rel {eps}: {} modes, projection error {:.3e}, discarded energy {:.3e}",
            t.len(),
            basis.projection_error(&w, &a, t.len()),
            basis.tail_energy(t.len())
        );
    }
    let n = truncate_energy(&basis, 0.9999)?.len();
    println!(
        "largest principal angle between SVD and snapshot bases ({n} modes): {:.2e} rad",
        largest_principal_angle(&basis.modes.columns(0, n).into_owned(), &svd.modes.columns(0, n).into_owned(), &w)
    );
    write_spectrum_csv("stator_spectrum.csv", &basis.eigenvalues)?;
    println!("wrote stator_spectrum.csv");
    Ok(())
}
