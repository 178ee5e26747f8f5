//! Greedy snapshot selection over pole-local index sets, with the iteration log
//! and error traces written as CSV.
//!
//! cargo run --release --example adaptive_sampling -- [tolerance]

use pmsm_rom::adaptive::{adaptive_solve, AdaptiveConfig, IndexSetFamily};
use pmsm_rom::certify::write_traces;
use pmsm_rom::fem::FemModel;
use pmsm_rom::machine::MachineSpec;

fn main() -> pmsm_rom::Result<()> {
    let tolerance: f64 = std::env::args().nth(1).map_or(Ok(1e-3), |s| s.parse()).unwrap_or(1e-3);
    let mut spec = MachineSpec::coarse();
    spec.perturb_magnet(0, 5f64.to_radians());
    let system = FemModel::new(&spec)?.system()?;
    let family = IndexSetFamily::pole_local(spec.n_interface, spec.n_poles, 4, false)?;
    let cfg = AdaptiveConfig {
        tolerance,
        ..AdaptiveConfig::default()
    };
    let run = adaptive_solve(&system, &family, &cfg)?;
    for l in &run.log {
        println!(
            "iteration {:>2}: set {:>2}, {:>3} solves, basis ({}, {}), max estimate {:.3e} at step {}",
            l.iteration, l.set, l.solves, l.n_s, l.n_r, l.max_delta_rel, l.argmax_step
        );
    }
    println!(
        "{:?}: {} of {} steps solved, overhead {:.0}%",
        run.termination,
        run.solve_count(),
        system.n_angles(),
        100.0 * run.overhead()
    );
    run.write_log_csv("adaptive_log.csv")?;
    write_traces("adaptive_traces.csv", &run.reports.iter().collect::<Vec<_>>())?;
    println!("wrote adaptive_log.csv and adaptive_traces.csv");
    Ok(())
}
