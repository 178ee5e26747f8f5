//! Full-order solves at a few rotor steps. Rotation is an index shift of the
//! rotor side onto the interface, so the assembled matrices never change.
//!
//! cargo run --release --example locked_step_sweep

use pmsm_rom::fem::{sweep_full, FemModel};
use pmsm_rom::machine::MachineSpec;

fn main() -> pmsm_rom::Result<()> {
    let spec = MachineSpec::default();
    let system = FemModel::new(&spec)?.system()?;
    let d = system.dims;
    println!("blocks: n_s = {}, n_r = {}, N_I = {}", d.n_s, d.n_r, d.n_i);

    let steps = [0, 30, 60, 90, 120];
    let (snapshots, timing) = sweep_full(&system, &steps)?;
    println!("{} solves in {:.3} s", timing.solves, timing.wall.as_secs_f64());
    for (c, &k) in snapshots.steps.iter().enumerate() {
        let a = snapshots.matrix.column(c);
        let a_i = a.rows_range(d.interface());
        println!(
            "step {k:>3} ({:>6.2} deg): |a| = {:.4e}, max |A_z| on interface = {:.4e}",
            system.angle(k).to_degrees(),
            a.norm(),
            a_i.amax()
        );
    }
    // one pole pitch later the symmetric machine's field flips sign
    let pitch = d.n_i / spec.n_poles;
    let a0 = snapshots.column_of(0).unwrap().rows_range(d.interface()).into_owned();
    let a1 = snapshots.column_of(pitch).unwrap().rows_range(d.interface()).into_owned();
    println!(
        "interface field after one pole pitch: |a(0) + a({pitch})| / |a(0)| = {:.2e}",
        (&a0 + &a1).norm() / a0.norm()
    );
    Ok(())
}
