//! Normalized POD spectra of the stator, rotor and interface rows for the
//! symmetric machine and a machine with one longer tooth.
//!
//! cargo run --release --example eigen_decay

use pmsm_rom::bench::{eig_decay, Scenario, ScenarioName};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::pod::Block;

fn main() -> pmsm_rom::Result<()> {
    let base = MachineSpec::default();
    for name in [ScenarioName::Sym, ScenarioName::Stat] {
        let scn = Scenario::named(name);
        let decay = eig_decay(&scn, &base, None)?;
        let file = format!("{}_decay.csv", name.as_str());
        decay.write_csv(&file)?;
        print!("{:<5}", name.as_str());
        for b in Block::ALL {
            print!("  {} {:>3}", b.name(), decay.count_above(b, 1e-8));
        }
        println!("   (eigenvalues above 1e-8, written to {file})");
    }
    Ok(())
}
