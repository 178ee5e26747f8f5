//! Command-line verbs behind the `pmsm-rom` binary.
//!
//! Exit codes: 0 success, 2 invalid input, 3 non-convergence, 1 anything else.
//! `PMSM_ROM_OUT_DIR` and `PMSM_ROM_THREADS` override the output directory and
//! the worker thread count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adaptive::FamilyKind;
use crate::bench::{compare_families, eig_decay, prepare, run_prepared, Scenario, ScenarioName};
use crate::error::{Error, Result};
use crate::fem::sweep_full;
use crate::io::{write_snapshots_bin, write_snapshots_csv};
use crate::machine::MachineSpec;
use crate::mesh::build_mesh;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pmsm-rom", version, about = "Certified reduced-order sweeps of a rotating machine model")]
pub struct Cli {
    /// Directory for all written artifacts.
    #[arg(long, global = true, env = "PMSM_ROM_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for parallel solves (default: all cores).
    #[arg(long, global = true, env = "PMSM_ROM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Triangulate the machine and write the mesh text file.
    BuildMesh(ScenarioArgs),
    /// Full-order solves at the given steps (all steps by default).
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated step indices.
        #[arg(long, value_delimiter = ',')]
        steps: Vec<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: SnapshotFormat,
    },
    /// Adaptive reduced model with certified error.
    Adapt(ScenarioArgs),
    /// Normalized POD spectra of the stator, rotor and interface blocks.
    EigDecay(ScenarioArgs),
    /// Full sweep against the adaptive run, averaged over the repeat count.
    Bench(ScenarioArgs),
    /// Both index-set families over a list of named scenarios.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated scenario names.
        #[arg(long, value_delimiter = ',', default_value = "sym,rot,stat,rot_stat")]
        names: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SnapshotFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Machine description (TOML); the built-in surrogate when absent.
    #[arg(long)]
    pub machine: Option<PathBuf>,
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "name")]
    pub scenario: Option<PathBuf>,
    /// Named scenario: sym, rot, stat, rot_stat or custom.
    #[arg(long)]
    pub name: Option<String>,
    /// Index-set family: pole-local (K) or distributed (M).
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub eps_rel: Option<f64>,
    #[arg(long)]
    pub n_interface: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn base(&self) -> Result<MachineSpec> {
        match &self.machine {
            Some(p) => MachineSpec::from_file(p),
            None => Ok(MachineSpec::default()),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = match (&self.scenario, &self.name) {
            (Some(p), _) => Scenario::from_file(p)?,
            (None, Some(n)) => Scenario::named(n.parse()?),
            (None, None) => Scenario::named(ScenarioName::Sym),
        };
        if let Some(f) = &self.family {
            s.family = f.parse()?;
        }
        if let Some(v) = self.tolerance {
            s.tolerance = v;
        }
        if let Some(v) = self.eps_rel {
            s.eps_rel = v;
        }
        if let Some(v) = self.n_interface {
            s.n_interface = Some(v);
        }
        if let Some(v) = self.repeats {
            s.repeats = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        s.validate()?;
        Ok(s)
    }
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

/// Runs one verb and returns the exit code for a completed run.
pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let dir = cli.out_dir.as_path();
    match &cli.command {
        Command::BuildMesh(a) => {
            let spec = a.scenario()?.machine(&a.base()?)?;
            let mesh = build_mesh(&spec)?;
            let path = out_path(dir, "mesh.txt")?;
            mesh.write_text(&path)?;
            println!(
                "{} nodes, {} triangles, {} interface nodes -> {}",
                mesh.n_nodes(),
                mesh.triangles.len(),
                spec.n_interface,
                path.display()
            );
            Ok(EXIT_OK)
        }
        Command::Sweep { scenario, steps, format } => {
            let scn = scenario.scenario()?;
            let spec = scn.machine(&scenario.base()?)?;
            let system = crate::fem::FemModel::new(&spec)?.system()?;
            let steps: Vec<usize> = if steps.is_empty() { (0..system.n_angles()).collect() } else { steps.clone() };
            let (set, timing) = sweep_full(&system, &steps)?;
            let path = match format {
                SnapshotFormat::Csv => {
                    let p = out_path(dir, &format!("{}_snapshots.csv", scn.name.as_str()))?;
                    write_snapshots_csv(&p, &set)?;
                    p
                }
                SnapshotFormat::Bin => {
                    let p = out_path(dir, &format!("{}_snapshots.bin", scn.name.as_str()))?;
                    write_snapshots_bin(&p, &set)?;
                    p
                }
            };
            println!(
                "{} solves in {:.3} s -> {}",
                timing.solves,
                timing.wall.as_secs_f64(),
                path.display()
            );
            Ok(EXIT_OK)
        }
        Command::Adapt(a) => {
            let mut scn = a.scenario()?;
            scn.repeats = 1;
            let spec = scn.machine(&a.base()?)?;
            let system = crate::fem::FemModel::new(&spec)?.system()?;
            let sets = scn.index_sets(&spec)?;
            let t = Instant::now();
            let run = crate::adaptive::adaptive_solve(&system, &sets, &scn.adaptive_config())?;
            let stem = scn.label();
            run.write_log_csv(out_path(dir, &format!("{stem}_log.csv"))?)?;
            run.write_json(out_path(dir, &format!("{stem}_run.json"))?)?;
            let reports: Vec<_> = run.reports.iter().collect();
            crate::certify::write_traces(out_path(dir, &format!("{stem}_traces.csv"))?, &reports)?;
            for l in &run.log {
                println!(
                    "iteration {:>3}: set {:>3}, basis ({}, {}), max rel estimate {:.3e} at step {}",
                    l.iteration, l.set, l.n_s, l.n_r, l.max_delta_rel, l.argmax_step
                );
            }
            println!(
                "{:?} after {} iterations, {} full solves, {:.2} s",
                run.termination,
                run.iterations(),
                run.solve_count(),
                t.elapsed().as_secs_f64()
            );
            Ok(if run.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::EigDecay(a) => {
            let scn = a.scenario()?;
            let decay = eig_decay(&scn, &a.base()?, None)?;
            let path = out_path(dir, &format!("{}_decay.csv", scn.name.as_str()))?;
            decay.write_csv(&path)?;
            for b in crate::pod::Block::ALL {
                println!("{:<10} {:>4} normalized eigenvalues above 1e-8", b.name(), decay.count_above(b, 1e-8));
            }
            Ok(EXIT_OK)
        }
        Command::Bench(a) => {
            let scn = a.scenario()?;
            let prep = prepare(&scn, &a.base()?)?;
            let out = run_prepared(&prep, scn.family, Some(dir))?;
            let r = &out.report;
            println!(
                "{} ({}): FEM {:.3} s, ROM {:.3} s, basis ({}, {}), {} iterations, speedup {:.2}, overhead {:.0}%, {} solves{}",
                r.setting,
                r.family.name(),
                r.fem_time,
                r.rom_time,
                r.n_s,
                r.n_r,
                r.iterations,
                r.speedup,
                100.0 * r.overhead,
                r.solves,
                if r.converged { "" } else { ", not converged" }
            );
            Ok(if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Compare { scenario, names } => {
            let template = scenario.scenario()?;
            let base = scenario.base()?;
            let mut list = Vec::new();
            for n in names.iter().filter(|n| !n.trim().is_empty()) {
                let name: ScenarioName = n.parse()?;
                let mut s = Scenario::named(name);
                s.family = FamilyKind::PoleLocal;
                s.subsets_per_pole = template.subsets_per_pole;
                s.allow_uneven = template.allow_uneven;
                s.tolerance = template.tolerance;
                s.eps_rel = template.eps_rel;
                s.n_interface = template.n_interface;
                s.repeats = template.repeats;
                s.seed = template.seed;
                list.push(s);
            }
            let cmp = compare_families(&list, &base, Some(dir));
            let table = cmp.render();
            print!("{table}");
            std::fs::write(out_path(dir, "compare.txt")?, &table)?;
            Ok(if cmp.any_failed() {
                1
            } else if cmp.all_converged() {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            })
        }
    }
}
