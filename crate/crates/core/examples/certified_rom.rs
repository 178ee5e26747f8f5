//! Reduced model from one pole's worth of snapshots, certified at every step and
//! checked against the full solutions.
//!
//! cargo run --release --example certified_rom

use pmsm_rom::adaptive::block_bases;
use pmsm_rom::certify::{certify_sweep, system_coercivity, CertificateConfig};
use pmsm_rom::fem::{sweep_full, FemModel};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::pod::ReducedModel;

fn main() -> pmsm_rom::Result<()> {
    let spec = MachineSpec::coarse();
    let system = FemModel::new(&spec)?.system()?;
    let n = system.n_angles();
    let pitch = n / spec.n_poles;
    let cfg = CertificateConfig::default();

    let (train, _) = sweep_full(&system, &(0..pitch).step_by(2).collect::<Vec<_>>())?;
    let (truth, _) = sweep_full(&system, &(0..n).collect::<Vec<_>>())?;
    let alpha = system_coercivity(&system, 0, &cfg)?;
    println!("coercivity constant {alpha:.6e}");

    for eps in [0.9999, 1.0 - 1e-10] {
        let (bs, br) = block_bases(&train, &cfg, eps)?;
        let rom = ReducedModel::project(&system, &bs, &br)?;
        let report = certify_sweep(&system, &rom, alpha, &cfg, Some(&truth))?;
        let true_rel = report
            .true_error
            .as_ref()
            .unwrap()
            .iter()
            .zip(&report.solution_norm)
            .map(|(e, a)| e / a)
            .fold(0.0, f64::max);
        let (lo, hi) = report.effectivity_range().unwrap();
        println!(
            "eps_rel {eps}: basis ({}, {}), max estimate {:.3e} at step {}, max true relative error {:.3e}, \
             effectivity {lo:.1}..{hi:.1}",
            rom.n_s(),
            rom.n_r(),
            report.max_rel(),
            report.argmax_step(),
            true_rel
        );
    }
    Ok(())
}
