//! Both index-set families over the four named scenarios on the coarse machine,
//! printed as two performance tables.
//!
//! cargo run --release --example scenario_bench -- [out_dir]

use pmsm_rom::bench::{compare_families, Scenario, ScenarioName};
use pmsm_rom::machine::MachineSpec;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "bench_out".into());
    let base = MachineSpec::coarse();
    let scenarios: Vec<Scenario> = ScenarioName::NAMED
        .iter()
        .map(|&n| Scenario {
            subsets_per_pole: 4,
            repeats: 1,
            ..Scenario::named(n)
        })
        .collect();
    let cmp = compare_families(&scenarios, &base, Some(out.as_ref()));
    print!("{}", cmp.render());
    println!("* = all index sets used without reaching the tolerance; artifacts in {out}/");
}
