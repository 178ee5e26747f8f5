//! Greedy growth of the snapshot set driven by the certified error.
//!
//! Angle indices are 0-based. The pole-local family splits each pole section of
//! `S = N_I / N_p` steps into `J` interleaved subsets
//! `𝒦_ij = { S·i + j + m·J }`; the distributed family uses
//! `ℳ_i = { i + m·count }` across the whole revolution.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::certify::{certify_sweep, system_coercivity, CertificateConfig, ErrorReport};
use crate::error::{Error, Result};
use crate::fem::{sweep_full, BlockSystem};
use crate::pod::{pod_snapshot_truncated, Block, PodBasis, ReducedModel, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    PoleLocal,
    Distributed,
    Custom,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::PoleLocal => "pole-local",
            FamilyKind::Distributed => "distributed",
            FamilyKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    /// Accepts `pole-local` (or `K`) and `distributed` (or `M`).
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pole-local" | "pole_local" | "K" | "k" => Ok(FamilyKind::PoleLocal),
            "distributed" | "M" | "m" => Ok(FamilyKind::Distributed),
            "custom" => Ok(FamilyKind::Custom),
            other => Err(Error::InvalidArgument(format!("unknown index-set family {other:?}"))),
        }
    }
}

/// Disjoint sets of rotor steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexSetFamily {
    pub kind: FamilyKind,
    pub n_angles: usize,
    pub sets: Vec<Vec<usize>>,
}

fn nearest_multiple(n: usize, q: usize) -> usize {
    let lo = (n / q).max(1) * q;
    let hi = lo + q;
    if n - lo.min(n) <= hi - n { lo } else { hi }
}

impl IndexSetFamily {
    /// Pole-local sets. With `allow_uneven`, a section length not divisible by
    /// `subsets` is accepted and each set keeps the indices `S·i + j + m·J < S·(i+1)`.
    pub fn pole_local(n_angles: usize, n_poles: usize, subsets: usize, allow_uneven: bool) -> Result<Self> {
        if n_poles == 0 || subsets == 0 || n_angles % n_poles != 0 {
            return Err(Error::InvalidIndexSets(format!(
                "{n_angles} angles cannot be split into {n_poles} pole sections"
            )));
        }
        let s = n_angles / n_poles;
        if subsets > s {
            return Err(Error::InvalidIndexSets(format!(
                "{subsets} subsets exceed the section length {s}"
            )));
        }
        if s % subsets != 0 && !allow_uneven {
            return Err(Error::InvalidIndexSets(format!(
                "section length {s} is not divisible by {subsets}; nearest admissible n_interface is {} \
                 (or allow uneven sets)",
                nearest_multiple(n_angles, n_poles * subsets)
            )));
        }
        let mut sets = Vec::with_capacity(n_poles * subsets);
        for i in 0..n_poles {
            for j in 0..subsets {
                sets.push((s * i + j..s * (i + 1)).step_by(subsets).collect());
            }
        }
        Self::custom_kind(FamilyKind::PoleLocal, n_angles, sets)
    }

    /// Distributed sets `{i + m·count}`.
    pub fn distributed(n_angles: usize, count: usize, allow_uneven: bool) -> Result<Self> {
        if count == 0 || count > n_angles {
            return Err(Error::InvalidIndexSets(format!("{count} sets for {n_angles} angles")));
        }
        if n_angles % count != 0 && !allow_uneven {
            return Err(Error::InvalidIndexSets(format!(
                "{n_angles} angles do not split evenly into {count} sets; nearest admissible n_interface \
                 is {} (or allow uneven sets)",
                nearest_multiple(n_angles, count)
            )));
        }
        let sets = (0..count).map(|i| (i..n_angles).step_by(count).collect()).collect();
        Self::custom_kind(FamilyKind::Distributed, n_angles, sets)
    }

    pub fn custom(n_angles: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        Self::custom_kind(FamilyKind::Custom, n_angles, sets)
    }

    fn custom_kind(kind: FamilyKind, n_angles: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n_angles];
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidIndexSets(format!("set {i} is empty")));
            }
            for &k in set {
                if k >= n_angles {
                    return Err(Error::InvalidIndexSets(format!("set {i} holds step {k} >= {n_angles}")));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidIndexSets(format!("step {k} appears in more than one set")));
                }
            }
        }
        Ok(Self { kind, n_angles, sets })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Set containing each step.
    pub fn owner(&self) -> HashMap<usize, usize> {
        let mut m = HashMap::new();
        for (i, s) in self.sets.iter().enumerate() {
            for &k in s {
                m.insert(k, i);
            }
        }
        m
    }

    /// Whether the sets cover every step exactly once.
    pub fn tiles(&self) -> bool {
        self.sets.iter().map(Vec::len).sum::<usize>() == self.n_angles
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    /// Target for `max_k Δ_a^rel`.
    pub tolerance: f64,
    /// Relative POD energy kept in each basis.
    pub eps_rel: f64,
    pub initial_set: usize,
    pub certificate: CertificateConfig,
    /// Coercivity constant; computed at the reference angle when absent.
    pub alpha: Option<f64>,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            eps_rel: 0.9999,
            initial_set: 0,
            certificate: CertificateConfig::default(),
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    SetsExhausted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub set: usize,
    pub set_size: usize,
    pub n_s: usize,
    pub n_r: usize,
    pub max_delta_rel: f64,
    pub argmax_step: usize,
    pub solves: usize,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub family: FamilyKind,
    pub tolerance: f64,
    pub eps_rel: f64,
    pub log: Vec<IterationLog>,
    pub termination: Termination,
    pub snapshots: SnapshotSet,
    pub basis_s: PodBasis,
    pub basis_r: PodBasis,
    pub model: ReducedModel,
    /// Certificate of every iteration; the last one belongs to `model`.
    pub reports: Vec<ErrorReport>,
    pub alpha: f64,
    /// Time spent in full-order solves.
    pub full_time: Duration,
    pub total_time: Duration,
}

/// Summary written as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub family: FamilyKind,
    pub tolerance: f64,
    pub eps_rel: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub solves: usize,
    pub basis: (usize, usize),
    pub alpha: f64,
    pub final_max_delta_rel: f64,
    pub log: Vec<IterationLog>,
}

impl AdaptiveRun {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn report(&self) -> &ErrorReport {
        self.reports.last().expect("a run has at least one iteration")
    }

    /// Number of full-order solves consumed.
    pub fn solve_count(&self) -> usize {
        self.snapshots.len()
    }

    pub fn basis_sizes(&self) -> (usize, usize) {
        (self.basis_s.len(), self.basis_r.len())
    }

    /// Fraction of the run not spent in full-order solves.
    pub fn overhead(&self) -> f64 {
        let t = self.total_time.as_secs_f64();
        if t == 0.0 {
            return 0.0;
        }
        (1.0 - self.full_time.as_secs_f64() / t).clamp(0.0, 1.0)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            family: self.family,
            tolerance: self.tolerance,
            eps_rel: self.eps_rel,
            termination: self.termination,
            iterations: self.iterations(),
            solves: self.solve_count(),
            basis: self.basis_sizes(),
            alpha: self.alpha,
            final_max_delta_rel: self.report().max_rel(),
            log: self.log.clone(),
        }
    }

    /// Columns: `iteration,set,set_size,n_s,n_r,max_delta_rel,argmax_step,solves`.
    pub fn write_log_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.log {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, &self.summary())?;
        Ok(())
    }
}

pub fn solve_count(run: &AdaptiveRun) -> usize {
    run.solve_count()
}

/// Stator and rotor bases of a snapshot set, truncated to `eps_rel`.
pub fn block_bases(snapshots: &SnapshotSet, cfg: &CertificateConfig, eps_rel: f64) -> Result<(PodBasis, PodBasis)> {
    let d = snapshots.dims;
    let mut out = Vec::with_capacity(2);
    for b in [Block::Stator, Block::Rotor] {
        let w = cfg.weight.restrict(b.rows(&d));
        out.push(pod_snapshot_truncated(&snapshots.block(b), &w, eps_rel)?.with_block(b));
    }
    let r = out.pop().unwrap();
    let s = out.pop().unwrap();
    Ok((s, r))
}

/// Adaptive POD: add the set holding the worst-certified angle until
/// `max Δ_a^rel ≤ tolerance` or no unused set is left.
pub fn adaptive_solve(system: &BlockSystem, family: &IndexSetFamily, cfg: &AdaptiveConfig) -> Result<AdaptiveRun> {
    if !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", cfg.tolerance)));
    }
    if family.n_angles != system.n_angles() {
        return Err(Error::InvalidIndexSets(format!(
            "family built for {} angles, system has {}",
            family.n_angles,
            system.n_angles()
        )));
    }
    if cfg.initial_set >= family.len() {
        return Err(Error::InvalidIndexSets(format!(
            "initial set {} of {}",
            cfg.initial_set,
            family.len()
        )));
    }
    let start = Instant::now();
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => system_coercivity(system, 0, &cfg.certificate)?,
    };
    let owner = family.owner();
    let mut used = vec![false; family.len()];
    let mut snapshots = SnapshotSet::empty(system.dims);
    let mut full_time = Duration::ZERO;
    let mut log = Vec::new();
    let mut reports = Vec::new();
    let mut current = cfg.initial_set;
    loop {
        used[current] = true;
        let (new, timing) = sweep_full(system, &family.sets[current])?;
        full_time += timing.wall;
        snapshots.append(&new)?;
        let (basis_s, basis_r) = block_bases(&snapshots, &cfg.certificate, cfg.eps_rel)?;
        let model = ReducedModel::project(system, &basis_s, &basis_r)?;
        let report = certify_sweep(system, &model, alpha, &cfg.certificate, Some(&snapshots))?;
        log.push(IterationLog {
            iteration: log.len() + 1,
            set: current,
            set_size: family.sets[current].len(),
            n_s: basis_s.len(),
            n_r: basis_r.len(),
            max_delta_rel: report.max_rel(),
            argmax_step: report.argmax_step(),
            solves: snapshots.len(),
        });
        let done = report.max_rel() <= cfg.tolerance;
        let next = if done {
            None
        } else {
            report
                .ranked_steps()
                .into_iter()
                .filter_map(|k| owner.get(&k).copied())
                .find(|&i| !used[i])
        };
        reports.push(report);
        let termination = match (done, next) {
            (true, _) => Some(Termination::Converged),
            (false, None) => Some(Termination::SetsExhausted),
            (false, Some(i)) => {
                current = i;
                None
            }
        };
        if let Some(termination) = termination {
            return Ok(AdaptiveRun {
                family: family.kind,
                tolerance: cfg.tolerance,
                eps_rel: cfg.eps_rel,
                log,
                termination,
                snapshots,
                basis_s,
                basis_r,
                model,
                reports,
                alpha,
                full_time,
                total_time: start.elapsed(),
            });
        }
    }
}
