//! Named perturbation scenarios: full sweep against adaptive reduced model, POD
//! spectra and the side-by-side family tables.
//!
//! Mesh and constant matrices are assembled before any timer starts. FEM time is
//! one full sweep over all `N_I` steps; ROM time is one adaptive run including
//! its full-order solves, coercivity and certification.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_solve, AdaptiveConfig, AdaptiveRun, FamilyKind, IndexSetFamily};
use crate::certify::{write_traces, CertificateConfig};
use crate::error::{Error, Result};
use crate::fem::{sweep_full, BlockSystem, FemModel};
use crate::io::write_decay_csv;
use crate::machine::MachineSpec;
use crate::pod::{pod_snapshot_method, Block, SnapshotSet};
use crate::weight::Weight;

/// Magnet offset of the `rot` scenarios, degrees.
pub const MAGNET_OFFSET_DEG: f64 = 5.0;
/// Tooth offset of the `stat` scenarios, millimetres.
pub const TOOTH_OFFSET_MM: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Sym,
    Rot,
    Stat,
    RotStat,
    Custom,
}

impl ScenarioName {
    pub const NAMED: [ScenarioName; 4] = [ScenarioName::Sym, ScenarioName::Rot, ScenarioName::Stat, ScenarioName::RotStat];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Sym => "sym",
            ScenarioName::Rot => "rot",
            ScenarioName::Stat => "stat",
            ScenarioName::RotStat => "rot_stat",
            ScenarioName::Custom => "custom",
        }
    }

    /// `(magnet offset in degrees, tooth offset in mm)` bound to a named scenario.
    pub fn perturbations(self) -> Option<(f64, f64)> {
        match self {
            ScenarioName::Sym => Some((0.0, 0.0)),
            ScenarioName::Rot => Some((MAGNET_OFFSET_DEG, 0.0)),
            ScenarioName::Stat => Some((0.0, TOOTH_OFFSET_MM)),
            ScenarioName::RotStat => Some((MAGNET_OFFSET_DEG, TOOTH_OFFSET_MM)),
            ScenarioName::Custom => None,
        }
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sym" => Ok(ScenarioName::Sym),
            "rot" => Ok(ScenarioName::Rot),
            "stat" => Ok(ScenarioName::Stat),
            "rot_stat" | "rot-stat" => Ok(ScenarioName::RotStat),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario {other:?} (sym, rot, stat, rot_stat, custom)"
            ))),
        }
    }
}

/// One benchmark setting. Read from TOML; missing keys take the defaults below.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: ScenarioName,
    pub magnet_index: usize,
    pub magnet_offset_deg: f64,
    pub tooth_index: usize,
    pub tooth_offset_mm: f64,
    pub family: FamilyKind,
    /// `J`, subsets per pole; the distributed family uses `N_p · J` sets.
    pub subsets_per_pole: usize,
    pub allow_uneven: bool,
    /// Target for `max Δ_a^rel`; `inf` accepts the first basis.
    pub tolerance: f64,
    pub eps_rel: f64,
    /// Interface node count; the machine's own value when absent.
    pub n_interface: Option<usize>,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::named(ScenarioName::Sym)
    }
}

impl Scenario {
    pub fn named(name: ScenarioName) -> Self {
        let (magnet, tooth) = name.perturbations().unwrap_or((0.0, 0.0));
        Self {
            name,
            magnet_index: 0,
            magnet_offset_deg: magnet,
            tooth_index: 0,
            tooth_offset_mm: tooth,
            family: FamilyKind::PoleLocal,
            subsets_per_pole: 12,
            allow_uneven: false,
            tolerance: 1e-3,
            eps_rel: 0.9999,
            n_interface: None,
            seed: 7,
            repeats: 3,
        }
    }

    pub fn with_family(mut self, family: FamilyKind) -> Self {
        self.family = family;
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let scn: Scenario = toml::from_str(s)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.name.as_str(), self.family.name())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((magnet, tooth)) = self.name.perturbations() {
            if self.magnet_offset_deg != magnet || self.tooth_offset_mm != tooth {
                return Err(Error::InvalidArgument(format!(
                    "scenario {} fixes magnet offset {magnet} deg and tooth offset {tooth} mm; \
                     use name = \"custom\" for other values",
                    self.name.as_str()
                )));
            }
        }
        if self.family == FamilyKind::Custom {
            return Err(Error::InvalidArgument("scenarios use the pole-local or distributed family".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be positive", self.tolerance)));
        }
        if !(self.eps_rel > 0.0 && self.eps_rel <= 1.0) {
            return Err(Error::InvalidArgument(format!("eps_rel {} outside (0, 1]", self.eps_rel)));
        }
        if self.subsets_per_pole == 0 || self.repeats == 0 {
            return Err(Error::InvalidArgument("subsets_per_pole and repeats must be positive".into()));
        }
        Ok(())
    }

    /// `base` with this scenario's resolution and perturbations applied.
    pub fn machine(&self, base: &MachineSpec) -> Result<MachineSpec> {
        self.validate()?;
        let mut spec = base.clone();
        if let Some(n) = self.n_interface {
            spec.n_interface = n;
        }
        if self.magnet_index >= spec.n_poles {
            return Err(Error::InvalidArgument(format!(
                "magnet {} of {}",
                self.magnet_index, spec.n_poles
            )));
        }
        if self.tooth_index >= spec.n_teeth() {
            return Err(Error::InvalidArgument(format!(
                "tooth {} of {}",
                self.tooth_index,
                spec.n_teeth()
            )));
        }
        if self.magnet_offset_deg != 0.0 {
            let a = spec.magnet_angle(self.magnet_index) + self.magnet_offset_deg.to_radians();
            spec.perturb_magnet(self.magnet_index, a);
        }
        if self.tooth_offset_mm != 0.0 {
            let d = spec.tooth_offset(self.tooth_index) + self.tooth_offset_mm * 1e-3;
            spec.perturb_tooth(self.tooth_index, d);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn index_sets(&self, spec: &MachineSpec) -> Result<IndexSetFamily> {
        let n = spec.n_interface;
        match self.family {
            FamilyKind::PoleLocal => IndexSetFamily::pole_local(n, spec.n_poles, self.subsets_per_pole, self.allow_uneven),
            FamilyKind::Distributed => {
                IndexSetFamily::distributed(n, spec.n_poles * self.subsets_per_pole, self.allow_uneven)
            }
            FamilyKind::Custom => Err(Error::InvalidArgument("no custom sets in a scenario".into())),
        }
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            tolerance: self.tolerance,
            eps_rel: self.eps_rel,
            certificate: CertificateConfig {
                seed: self.seed,
                ..CertificateConfig::default()
            },
            ..AdaptiveConfig::default()
        }
    }
}

/// One row of the performance tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub setting: String,
    pub family: FamilyKind,
    /// Mean seconds per full sweep.
    pub fem_time: f64,
    /// Mean seconds per adaptive run.
    pub rom_time: f64,
    pub n_s: usize,
    pub n_r: usize,
    pub iterations: usize,
    pub speedup: f64,
    pub overhead: f64,
    pub solves: usize,
    pub n_angles: usize,
    pub converged: bool,
    pub final_max_delta_rel: f64,
}

impl BenchReport {
    fn new(setting: String, fem_time: f64, rom_time: f64, overhead: f64, run: &AdaptiveRun, n_angles: usize) -> Self {
        let (n_s, n_r) = run.basis_sizes();
        Self {
            setting,
            family: run.family,
            fem_time,
            rom_time,
            n_s,
            n_r,
            iterations: run.iterations(),
            speedup: if rom_time > 0.0 { fem_time / rom_time } else { f64::INFINITY },
            overhead,
            solves: run.solve_count(),
            n_angles,
            converged: run.converged(),
            final_max_delta_rel: run.report().max_rel(),
        }
    }

    /// `N_I / solves`.
    pub fn solve_reduction(&self) -> f64 {
        self.n_angles as f64 / self.solves as f64
    }
}

pub fn write_reports_csv(path: impl AsRef<Path>, reports: &[BenchReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Normalized POD spectra `λ_i / λ_1` of the three row blocks of a snapshot matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySpectra {
    pub stator: Vec<f64>,
    pub rotor: Vec<f64>,
    pub interface: Vec<f64>,
}

impl DecaySpectra {
    pub fn from_snapshots(full: &SnapshotSet) -> Result<Self> {
        let spectrum = |b: Block| -> Result<Vec<f64>> { Ok(pod_snapshot_method(&full.block(b), &Weight::Identity)?.normalized_eigenvalues()) };
        Ok(Self {
            stator: spectrum(Block::Stator)?,
            rotor: spectrum(Block::Rotor)?,
            interface: spectrum(Block::Interface)?,
        })
    }

    pub fn block(&self, b: Block) -> &[f64] {
        match b {
            Block::Stator => &self.stator,
            Block::Rotor => &self.rotor,
            Block::Interface => &self.interface,
        }
    }

    /// Number of normalized eigenvalues above `threshold`.
    pub fn count_above(&self, b: Block, threshold: f64) -> usize {
        self.block(b).iter().filter(|&&v| v > threshold).count()
    }

    /// Columns `mode,stator,rotor,interface`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_decay_csv(
            path,
            &[("stator", &self.stator), ("rotor", &self.rotor), ("interface", &self.interface)],
        )
    }
}

/// Scenario machine, assembled system and the timed full sweep.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub spec: MachineSpec,
    pub system: BlockSystem,
    pub full: SnapshotSet,
    pub fem_time: f64,
}

pub fn prepare(scenario: &Scenario, base: &MachineSpec) -> Result<Prepared> {
    let spec = scenario.machine(base)?;
    let system = FemModel::new(&spec)?.system()?;
    let steps: Vec<usize> = (0..system.n_angles()).collect();
    let mut total = 0.0;
    let mut full = None;
    for _ in 0..scenario.repeats {
        let (set, timing) = sweep_full(&system, &steps)?;
        total += timing.wall.as_secs_f64();
        full = Some(set);
    }
    Ok(Prepared {
        scenario: scenario.clone(),
        spec,
        system,
        full: full.expect("repeats is positive"),
        fem_time: total / scenario.repeats as f64,
    })
}

/// Result of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: BenchReport,
    pub run: AdaptiveRun,
    pub decay: DecaySpectra,
    pub artifacts: Vec<PathBuf>,
}

/// Adaptive runs on a prepared scenario under `family`, timed over the repeat count.
pub fn run_prepared(prep: &Prepared, family: FamilyKind, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    let scn = prep.scenario.clone().with_family(family);
    let sets = scn.index_sets(&prep.spec)?;
    let cfg = scn.adaptive_config();
    let mut rom = 0.0;
    let mut overhead = 0.0;
    let mut last = None;
    for _ in 0..scn.repeats {
        let t = Instant::now();
        let run = adaptive_solve(&prep.system, &sets, &cfg)?;
        rom += t.elapsed().as_secs_f64();
        overhead += run.overhead();
        last = Some(run);
    }
    let run = last.expect("repeats is positive");
    let n = scn.repeats as f64;
    let report = BenchReport::new(scn.name.as_str().to_string(), prep.fem_time, rom / n, overhead / n, &run, prep.system.n_angles());
    let decay = DecaySpectra::from_snapshots(&prep.full)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let stem = scn.label();
        let path = |suffix: &str| dir.join(format!("{stem}_{suffix}"));
        decay.write_csv(path("decay.csv"))?;
        run.write_log_csv(path("log.csv"))?;
        run.write_json(path("run.json"))?;
        let reports: Vec<_> = run.reports.iter().collect();
        write_traces(path("traces.csv"), &reports)?;
        write_reports_csv(path("report.csv"), std::slice::from_ref(&report))?;
        artifacts.extend(["decay.csv", "log.csv", "run.json", "traces.csv", "report.csv"].map(path));
    }
    Ok(ScenarioOutcome {
        report,
        run,
        decay,
        artifacts,
    })
}

/// Full sweep and adaptive run of one scenario, with artifacts written to `out_dir`.
pub fn run_scenario(scenario: &Scenario, base: &MachineSpec, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    let prep = prepare(scenario, base)?;
    run_prepared(&prep, scenario.family, out_dir)
}

/// POD spectra of a scenario's full revolution, reusing `full` when given.
pub fn eig_decay(scenario: &Scenario, base: &MachineSpec, full: Option<&SnapshotSet>) -> Result<DecaySpectra> {
    match full {
        Some(f) => DecaySpectra::from_snapshots(f),
        None => {
            let spec = scenario.machine(base)?;
            let system = FemModel::new(&spec)?.system()?;
            let steps: Vec<usize> = (0..system.n_angles()).collect();
            DecaySpectra::from_snapshots(&sweep_full(&system, &steps)?.0)
        }
    }
}

/// A table row; failed scenarios keep their error message.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub setting: String,
    pub result: std::result::Result<BenchReport, String>,
}

/// Both family tables over the same scenarios.
#[derive(Debug, Clone, Default)]
pub struct Comparison {
    pub pole_local: Vec<ComparisonRow>,
    pub distributed: Vec<ComparisonRow>,
}

pub fn compare_families(scenarios: &[Scenario], base: &MachineSpec, out_dir: Option<&Path>) -> Comparison {
    let mut out = Comparison::default();
    for scn in scenarios {
        let setting = scn.name.as_str().to_string();
        match prepare(scn, base) {
            Ok(prep) => {
                for (family, rows) in [
                    (FamilyKind::PoleLocal, &mut out.pole_local),
                    (FamilyKind::Distributed, &mut out.distributed),
                ] {
                    rows.push(ComparisonRow {
                        setting: setting.clone(),
                        result: run_prepared(&prep, family, out_dir).map(|o| o.report).map_err(|e| e.to_string()),
                    });
                }
            }
            Err(e) => {
                for rows in [&mut out.pole_local, &mut out.distributed] {
                    rows.push(ComparisonRow {
                        setting: setting.clone(),
                        result: Err(e.to_string()),
                    });
                }
            }
        }
    }
    out
}

impl Comparison {
    pub fn is_empty(&self) -> bool {
        self.pole_local.is_empty() && self.distributed.is_empty()
    }

    /// All rows ran and converged.
    pub fn all_converged(&self) -> bool {
        self.pole_local
            .iter()
            .chain(&self.distributed)
            .all(|r| r.result.as_ref().is_ok_and(|b| b.converged))
    }

    pub fn any_failed(&self) -> bool {
        self.pole_local.iter().chain(&self.distributed).any(|r| r.result.is_err())
    }

    /// Two plain-text tables; `*` marks runs that used up all sets without converging.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (title, rows) in [
            ("index sets: pole-local", &self.pole_local),
            ("index sets: distributed", &self.distributed),
        ] {
            let _ = writeln!(s, "{title}");
            let _ = writeln!(
                s,
                "{:<10} {:>10} {:>10} {:>12} {:>6} {:>9} {:>9}",
                "Setting", "FEM (s)", "ROM (s)", "Basis", "Iter.", "Speedup", "Overhead"
            );
            for row in rows {
                match &row.result {
                    Ok(r) => {
                        let iter = format!("{}{}", r.iterations, if r.converged { "" } else { "*" });
                        let _ = writeln!(
                            s,
                            "{:<10} {:>10.3} {:>10.3} {:>12} {:>6} {:>9.2} {:>8.0}%",
                            row.setting,
                            r.fem_time,
                            r.rom_time,
                            format!("({}, {})", r.n_s, r.n_r),
                            iter,
                            r.speedup,
                            100.0 * r.overhead
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(s, "{:<10} failed: {e}", row.setting);
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_scenarios_bind_their_perturbations() {
        let base = MachineSpec::coarse();
        let rs = Scenario::named(ScenarioName::RotStat).machine(&base).unwrap();
        assert!((rs.magnet_angle(0) - 5f64.to_radians()).abs() < 1e-15);
        assert!((rs.tooth_offset(0) - 0.3e-3).abs() < 1e-15);
        assert!(Scenario::named(ScenarioName::Sym).machine(&base).unwrap().is_symmetric());
        let mut bad = Scenario::named(ScenarioName::Rot);
        bad.magnet_offset_deg = 4.0;
        assert!(matches!(bad.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn scenario_toml_defaults_and_infinite_tolerance() {
        let s = Scenario::from_toml_str("name = \"custom\"\ntolerance = inf\nfamily = \"distributed\"\n").unwrap();
        assert_eq!(s.name, ScenarioName::Custom);
        assert_eq!(s.family, FamilyKind::Distributed);
        assert!(s.tolerance.is_infinite());
        assert_eq!(s.eps_rel, 0.9999);
        assert!(Scenario::from_toml_str("name = \"sym\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn degenerate_custom_run_takes_one_iteration() {
        let mut scn = Scenario::named(ScenarioName::Custom);
        scn.tolerance = f64::INFINITY;
        scn.repeats = 1;
        scn.subsets_per_pole = 4;
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&scn, &MachineSpec::coarse(), Some(dir.path())).unwrap();
        assert_eq!(out.report.iterations, 1);
        assert!(out.report.converged);
        assert!(out.report.speedup > 0.0);
        assert!((out.report.speedup - out.report.fem_time / out.report.rom_time).abs() <= 1e-12 * out.report.speedup);
        assert!((0.0..=1.0).contains(&out.report.overhead));
        for p in &out.artifacts {
            assert!(p.exists(), "{}", p.display());
        }
        for b in Block::ALL {
            let v = out.decay.block(b);
            assert!(v.windows(2).all(|w| w[1] <= w[0]) && v.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn empty_comparison_renders_headers_only() {
        let c = compare_families(&[], &MachineSpec::coarse(), None);
        assert!(c.is_empty());
        assert!(c.render().contains("Setting"));
    }
}
