//! Coercivity constant, residual norms and a posteriori error estimators.
//!
//! For a reduced solution `a^N` at step `k` with residual `r = f − K a^N`:
//! `Δ_a = ‖r‖_{W⁻¹} / α` bounds `‖a − a^N‖_W`, and `Δ_a^rel = 2 Δ_a / ‖a^N‖_W`.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{smallest_eigenpairs, EigenConfig};
use crate::error::{Error, Result};
use crate::fem::BlockSystem;
use crate::pod::{ReducedModel, SnapshotSet};
use crate::sparse::{dense_t_sp, sp_dense, spmv};
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoercivityPolicy {
    /// Computed at the reference angle and reused; rotation is a permutation
    /// similarity of the system matrix, so the value does not change.
    #[default]
    Once,
    PerAngle,
}

#[derive(Debug, Clone)]
pub struct CertificateConfig {
    pub weight: Weight,
    pub policy: CoercivityPolicy,
    pub eigen_tolerance: f64,
    /// Seed of the random start block of the eigensolver.
    pub seed: u64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            weight: Weight::Identity,
            policy: CoercivityPolicy::Once,
            eigen_tolerance: EigenConfig::default().tolerance,
            seed: EigenConfig::default().seed,
        }
    }
}

impl CertificateConfig {
    fn eigen(&self) -> EigenConfig {
        EigenConfig {
            tolerance: self.eigen_tolerance,
            seed: self.seed,
            ..EigenConfig::default()
        }
    }
}

/// The `count` smallest generalized eigenvalues of `(K, W)`.
pub fn smallest_eigenvalues(k: &CsrMatrix<f64>, w: &Weight, count: usize, tolerance: f64) -> Result<Vec<f64>> {
    let cfg = EigenConfig {
        tolerance,
        ..EigenConfig::default()
    };
    Ok(smallest_eigenpairs(k, w, count, &cfg)?.values)
}

/// Smallest generalized eigenvalue of `(K, W)`.
pub fn coercivity(k: &CsrMatrix<f64>, w: &Weight, tolerance: f64) -> Result<f64> {
    Ok(smallest_eigenvalues(k, w, 1, tolerance)?[0])
}

/// `‖f(ϑ_k) − K(ϑ_k) a‖_{W⁻¹}`.
pub fn residual_norm(system: &BlockSystem, k: usize, a: &DVector<f64>, w: &Weight) -> Result<f64> {
    if a.len() != system.dims.total() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for {} dofs",
            a.len(),
            system.dims.total()
        )));
    }
    let r = system.rhs(k)? - system.apply(k, a)?;
    w.dual_norm(&r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub residual: f64,
    /// `Δ_a`
    pub absolute: f64,
    /// `Δ_a^rel`; infinite for a zero reduced solution with nonzero residual.
    pub relative: f64,
}

pub fn estimate(residual: f64, alpha: f64, solution_norm: f64) -> Result<Estimate> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("coercivity constant {alpha} is not positive")));
    }
    let absolute = residual / alpha;
    let relative = if solution_norm > 0.0 {
        2.0 * absolute / solution_norm
    } else if absolute == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Estimate {
        residual,
        absolute,
        relative,
    })
}

/// Per-angle estimator values of a reduced model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub steps: Vec<usize>,
    pub delta: Vec<f64>,
    pub delta_rel: Vec<f64>,
    pub residual: Vec<f64>,
    /// `‖a^N‖_W`.
    pub solution_norm: Vec<f64>,
    /// `‖a − a^N‖_W` where a full solution was supplied.
    pub true_error: Option<Vec<f64>>,
    pub alpha: f64,
    /// Position (in `steps`) of the largest `Δ_a^rel`.
    pub argmax: usize,
    #[serde(skip)]
    pub wall: Duration,
}

impl ErrorReport {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn max_rel(&self) -> f64 {
        self.delta_rel.get(self.argmax).copied().unwrap_or(0.0)
    }

    pub fn argmax_step(&self) -> usize {
        self.steps[self.argmax]
    }

    /// Steps ordered by decreasing `Δ_a^rel`.
    pub fn ranked_steps(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&i, &j| self.delta_rel[j].total_cmp(&self.delta_rel[i]).then(i.cmp(&j)));
        idx.into_iter().map(|i| self.steps[i]).collect()
    }

    /// Largest `Δ_a / ‖a − a^N‖_W` over angles with a nonzero true error.
    pub fn max_effectivity(&self) -> Option<f64> {
        self.effectivity_range().map(|r| r.1)
    }

    pub fn effectivity_range(&self) -> Option<(f64, f64)> {
        let te = self.true_error.as_ref()?;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (d, e) in self.delta.iter().zip(te) {
            if *e > 0.0 {
                lo = lo.min(d / e);
                hi = hi.max(d / e);
            }
        }
        (hi > 0.0).then_some((lo, hi))
    }

    /// Columns: `step,delta,delta_rel,residual,solution_norm,true_error`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "delta", "delta_rel", "residual", "solution_norm", "true_error"])?;
        for i in 0..self.len() {
            let te = self
                .true_error
                .as_ref()
                .map_or(String::new(), |t| format!("{:e}", t[i]));
            w.write_record([
                self.steps[i].to_string(),
                format!("{:e}", self.delta[i]),
                format!("{:e}", self.delta_rel[i]),
                format!("{:e}", self.residual[i]),
                format!("{:e}", self.solution_norm[i]),
                te,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] || (v[best].is_nan() && !x.is_nan()) {
            best = i;
        }
    }
    best
}

/// Coercivity constant of the system under the configured policy at step `k`.
pub fn system_coercivity(system: &BlockSystem, k: usize, cfg: &CertificateConfig) -> Result<f64> {
    let m = system.rotated(k)?.matrix;
    Ok(smallest_eigenpairs(&m, &cfg.weight, 1, &cfg.eigen())?.values[0])
}

/// Evaluates the estimator at every rotor step. When `truth` holds full
/// solutions, the true errors at those steps are recorded as well.
pub fn certify_sweep(
    system: &BlockSystem,
    model: &ReducedModel,
    alpha: f64,
    cfg: &CertificateConfig,
    truth: Option<&SnapshotSet>,
) -> Result<ErrorReport> {
    let n = system.n_angles();
    let start = Instant::now();
    let alphas: Vec<f64> = match cfg.policy {
        CoercivityPolicy::Once => vec![alpha; n],
        CoercivityPolicy::PerAngle => (0..n)
            .into_par_iter()
            .map(|k| system_coercivity(system, k, cfg))
            .collect::<Result<_>>()?,
    };
    let rows: Vec<(Estimate, f64, Option<f64>)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let sol = model.solve(k)?;
            let res = residual_norm(system, k, &sol.lifted, &cfg.weight)?;
            let norm = cfg.weight.norm(&sol.lifted);
            let est = estimate(res, alphas[k], norm)?;
            let err = truth
                .and_then(|t| t.column_of(k))
                .map(|a| cfg.weight.norm(&(a - &sol.lifted)));
            Ok((est, norm, err))
        })
        .collect::<Result<_>>()?;
    let wall = start.elapsed();
    let delta_rel: Vec<f64> = rows.iter().map(|r| r.0.relative).collect();
    let true_error = truth.map(|_| rows.iter().map(|r| r.2.unwrap_or(f64::NAN)).collect());
    Ok(ErrorReport {
        steps: (0..n).collect(),
        delta: rows.iter().map(|r| r.0.absolute).collect(),
        argmax: argmax(&delta_rel),
        delta_rel,
        residual: rows.iter().map(|r| r.0.residual).collect(),
        solution_norm: rows.iter().map(|r| r.1).collect(),
        true_error,
        alpha,
        wall,
    })
}

/// Residual norms through precomputed Gramians (Euclidean weight only).
///
/// The stator and rotor parts of `‖r‖²` are expanded into small matrices of
/// products between projected operators and loads; only the interface rows are
/// formed explicitly. The expansion subtracts large terms, so the result is
/// accurate relative to `‖f‖`, not to `‖r‖`.
#[derive(Debug, Clone)]
pub struct FastResidual {
    ns: usize,
    nr: usize,
    // stator rows: r_s = F_s c − Y_s ā_s − K_sI a_I
    fs_gram: DMatrix<f64>,
    fs_ys: DMatrix<f64>,
    fs_ksi: DMatrix<f64>,
    ys_ys: DMatrix<f64>,
    ys_ksi: DMatrix<f64>,
    ksi_ksi: CsrMatrix<f64>,
    // rotor rows (rotor frame): r_r = f_r − Y_r ā_r − K_rI P a_I
    fr_fr: f64,
    fr_yr: DVector<f64>,
    fr_kri: DVector<f64>,
    yr_yr: DMatrix<f64>,
    yr_kri: DMatrix<f64>,
    kri_kri: CsrMatrix<f64>,
    // interface rows
    zs: DMatrix<f64>,
    zr: DMatrix<f64>,
}

impl FastResidual {
    pub fn new(system: &BlockSystem, model: &ReducedModel, w: &Weight) -> Result<Self> {
        if !w.is_identity() {
            return Err(Error::InvalidArgument("fast residual supports the identity weight only".into()));
        }
        let d = system.dims;
        let l = &system.loads;
        let mut fs = DMatrix::zeros(d.n_s, 4);
        for q in 0..3 {
            fs.set_column(q, &l.phase[q].rows_range(d.stator()));
        }
        fs.set_column(3, &l.stator_fixed.rows_range(d.stator()));
        let fr = l.rotor.rows_range(d.rotor()).into_owned();
        let ys = sp_dense(&system.k_ss, &model.psi_s);
        let yr = sp_dense(&system.k_rr, &model.psi_r);
        let k_is = system.k_si.transpose();
        let k_ir = system.k_ri.transpose();
        Ok(Self {
            ns: model.n_s(),
            nr: model.n_r(),
            fs_gram: fs.transpose() * &fs,
            fs_ys: fs.transpose() * &ys,
            fs_ksi: dense_t_sp(&fs, &system.k_si),
            ys_ys: ys.transpose() * &ys,
            ys_ksi: dense_t_sp(&ys, &system.k_si),
            ksi_ksi: &k_is * &system.k_si,
            fr_fr: fr.dot(&fr),
            fr_yr: ys_vec(&yr, &fr),
            fr_kri: spmv(&k_ir, fr.as_slice()),
            yr_yr: yr.transpose() * &yr,
            yr_kri: dense_t_sp(&yr, &system.k_ri),
            kri_kri: &k_ir * &system.k_ri,
            zs: sp_dense(&k_is, &model.psi_s),
            zr: sp_dense(&k_ir, &model.psi_r),
        })
    }

    /// `‖r‖` at step `k` for reduced coefficients `[ā_s | ā_r | a_I]`.
    pub fn residual_norm(&self, system: &BlockSystem, k: usize, coeff: &DVector<f64>) -> Result<f64> {
        let k = system.check_step(k)?;
        let d = system.dims;
        let (ns, nr, ni) = (self.ns, self.nr, d.n_i);
        let a_s = coeff.rows(0, ns).into_owned();
        let a_r = coeff.rows(ns, nr).into_owned();
        let a_i = coeff.rows(ns + nr, ni).into_owned();
        // interface values in the rotor frame: (P a_I)[m] = a_I[m + k]
        let a_i_rot = DVector::from_fn(ni, |m, _| a_i[(m + k) % ni]);
        let cur = system.currents.currents(system.angle(k));
        let c = DVector::from_vec(vec![cur[0], cur[1], cur[2], 1.0]);

        let quad = |m: &CsrMatrix<f64>, x: &DVector<f64>| x.dot(&spmv(m, x.as_slice()));
        let rs2 = c.dot(&(&self.fs_gram * &c)) + a_s.dot(&(&self.ys_ys * &a_s)) + quad(&self.ksi_ksi, &a_i)
            - 2.0 * c.dot(&(&self.fs_ys * &a_s))
            - 2.0 * c.dot(&(&self.fs_ksi * &a_i))
            + 2.0 * a_s.dot(&(&self.ys_ksi * &a_i));
        let rr2 = self.fr_fr + a_r.dot(&(&self.yr_yr * &a_r)) + quad(&self.kri_kri, &a_i_rot)
            - 2.0 * self.fr_yr.dot(&a_r)
            - 2.0 * self.fr_kri.dot(&a_i_rot)
            + 2.0 * a_r.dot(&(&self.yr_kri * &a_i_rot));

        // interface rows formed directly
        let mut r_i = system.rhs(k)?.rows_range(d.interface()).into_owned();
        r_i -= &self.zs * &a_s;
        let zr_ar = &self.zr * &a_r;
        let kr_ai = spmv(&system.k_ii_r, a_i_rot.as_slice());
        for m in 0..ni {
            r_i[(m + k) % ni] -= zr_ar[m] + kr_ai[m];
        }
        r_i -= spmv(&system.k_ii_s, a_i.as_slice());
        Ok((rs2.max(0.0) + rr2.max(0.0) + r_i.norm_squared()).sqrt())
    }
}

fn ys_vec(y: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    y.transpose() * f
}

/// Writes `step,delta_rel` traces of several reports side by side.
pub fn write_traces(path: impl AsRef<Path>, reports: &[&ErrorReport]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "step")?;
    for i in 0..reports.len() {
        write!(f, ",iteration_{}", i + 1)?;
    }
    writeln!(f)?;
    let n = reports.iter().map(|r| r.len()).max().unwrap_or(0);
    for k in 0..n {
        write!(f, "{k}")?;
        for r in reports {
            write!(f, ",{:e}", r.delta_rel.get(k).copied().unwrap_or(f64::NAN))?;
        }
        writeln!(f)?;
    }
    Ok(())
}
