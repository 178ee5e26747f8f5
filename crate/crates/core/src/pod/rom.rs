//! Galerkin projection of the block system onto stator and rotor POD bases.
//!
//! The interface is not reduced. The reduced unknown is `[ā_s | ā_r | a_I]` with
//! `a_s ≈ Ψˢ ā_s` and `a_r ≈ Ψʳ ā_r`; rotation acts on the interface columns of the
//! rotor coupling and on the rotor part of the interface block, as in the full model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fem::{BlockDims, BlockSystem};
use crate::machine::ThreePhase;
use crate::pod::PodBasis;
use crate::sparse::{block, csr_from_triplets, dense_t_sp, entries, spmv, to_dense, SpdSolver};

/// Residual tolerance of reduced solves.
pub const ROM_SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub dims: BlockDims,
    pub psi_s: DMatrix<f64>,
    pub psi_r: DMatrix<f64>,
    k_s: DMatrix<f64>,
    k_r: DMatrix<f64>,
    k_si: DMatrix<f64>,
    k_ri: DMatrix<f64>,
    k_ii_s: CsrMatrix<f64>,
    k_ii_r: CsrMatrix<f64>,
    f_s_phase: [DVector<f64>; 3],
    f_s_fixed: DVector<f64>,
    f_i_phase: [DVector<f64>; 3],
    f_i_fixed: DVector<f64>,
    f_r: DVector<f64>,
    f_i_r: DVector<f64>,
    currents: ThreePhase,
    /// Interface block and `K_II⁻¹ K_siᵀ Ψˢ`, when the interface block does not depend on the step.
    fixed_interface: Option<(Arc<SpdSolver>, DMatrix<f64>)>,
}

/// Reduced coefficients and the lifted field at one rotor step.
#[derive(Debug, Clone)]
pub struct RomSolution {
    pub step: usize,
    pub coefficients: DVector<f64>,
    /// `[Ψˢ ā_s | Ψʳ ā_r | a_I]` in full dof numbering.
    pub lifted: DVector<f64>,
}

impl ReducedModel {
    pub fn project(system: &BlockSystem, psi_s: &PodBasis, psi_r: &PodBasis) -> Result<Self> {
        Self::from_modes(system, &psi_s.modes, &psi_r.modes)
    }

    pub fn from_modes(system: &BlockSystem, psi_s: &DMatrix<f64>, psi_r: &DMatrix<f64>) -> Result<Self> {
        let d = system.dims;
        if psi_s.nrows() != d.n_s || psi_r.nrows() != d.n_r {
            return Err(Error::DimensionMismatch(format!(
                "bases have {} and {} rows, blocks have {} and {}",
                psi_s.nrows(),
                psi_r.nrows(),
                d.n_s,
                d.n_r
            )));
        }
        if psi_s.ncols() > d.n_s || psi_r.ncols() > d.n_r {
            return Err(Error::DimensionMismatch("more modes than block rows".into()));
        }
        let l = &system.loads;
        let rows = |v: &DVector<f64>, r: std::ops::Range<usize>| v.rows_range(r).into_owned();
        let k_s = psi_s.transpose() * crate::sparse::sp_dense(&system.k_ss, psi_s);
        let k_r = psi_r.transpose() * crate::sparse::sp_dense(&system.k_rr, psi_r);
        let k_si = dense_t_sp(psi_s, &system.k_si);
        let fixed_interface = if shift_invariant(&system.k_ii_r, d.n_i) {
            let c = Arc::new(SpdSolver::factor(
                &interface_block(&system.k_ii_s, &system.k_ii_r, 0, d.n_i),
                "interface block",
            )?);
            let x = c.solve_many(&k_si.transpose());
            Some((c, x))
        } else {
            None
        };
        Ok(Self {
            dims: d,
            psi_s: psi_s.clone(),
            psi_r: psi_r.clone(),
            k_s: (&k_s + k_s.transpose()) * 0.5,
            k_r: (&k_r + k_r.transpose()) * 0.5,
            k_si,
            k_ri: dense_t_sp(psi_r, &system.k_ri),
            k_ii_s: system.k_ii_s.clone(),
            k_ii_r: system.k_ii_r.clone(),
            f_s_phase: [0, 1, 2].map(|q| psi_s.transpose() * rows(&l.phase[q], d.stator())),
            f_s_fixed: psi_s.transpose() * rows(&l.stator_fixed, d.stator()),
            f_i_phase: [0, 1, 2].map(|q| rows(&l.phase[q], d.interface())),
            f_i_fixed: rows(&l.stator_fixed, d.interface()),
            f_r: psi_r.transpose() * rows(&l.rotor, d.rotor()),
            f_i_r: rows(&l.rotor, d.interface()),
            currents: system.currents,
            fixed_interface,
        })
    }

    pub fn n_s(&self) -> usize {
        self.psi_s.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.psi_r.ncols()
    }

    /// Dimension `𝒩_s + 𝒩_r + N_I` of the reduced system.
    pub fn dim(&self) -> usize {
        self.n_s() + self.n_r() + self.dims.n_i
    }

    fn check_step(&self, k: usize) -> Result<usize> {
        if k > self.dims.n_i {
            return Err(Error::AngleOutOfRange {
                step: k,
                n_angles: self.dims.n_i,
            });
        }
        Ok(k % self.dims.n_i)
    }

    /// Reduced matrix at step `k`.
    pub fn matrix(&self, k: usize) -> Result<CsrMatrix<f64>> {
        let k = self.check_step(k)?;
        let (ns, nr, ni) = (self.n_s(), self.n_r(), self.dims.n_i);
        let o_r = ns;
        let o_i = ns + nr;
        let shift = |m: usize| (m + k) % ni;
        let mut t = Vec::with_capacity(ns * ns + nr * nr + 2 * (ns + nr) * ni + 8 * ni);
        for i in 0..ns {
            for j in 0..ns {
                t.push((i, j, self.k_s[(i, j)]));
            }
            for m in 0..ni {
                let v = self.k_si[(i, m)];
                if v != 0.0 {
                    t.push((i, o_i + m, v));
                    t.push((o_i + m, i, v));
                }
            }
        }
        for i in 0..nr {
            for j in 0..nr {
                t.push((o_r + i, o_r + j, self.k_r[(i, j)]));
            }
            for m in 0..ni {
                let v = self.k_ri[(i, m)];
                if v != 0.0 {
                    t.push((o_r + i, o_i + shift(m), v));
                    t.push((o_i + shift(m), o_r + i, v));
                }
            }
        }
        t.extend(entries(&self.k_ii_s).map(|(i, j, v)| (o_i + i, o_i + j, v)));
        t.extend(entries(&self.k_ii_r).map(|(i, j, v)| (o_i + shift(i), o_i + shift(j), v)));
        let n = self.dim();
        Ok(csr_from_triplets(n, n, t))
    }

    pub fn rhs(&self, k: usize) -> Result<DVector<f64>> {
        let k = self.check_step(k)?;
        let (ns, nr, ni) = (self.n_s(), self.n_r(), self.dims.n_i);
        let cur = self.currents.currents(2.0 * std::f64::consts::PI * k as f64 / ni as f64);
        let mut f = DVector::zeros(self.dim());
        let mut fs = self.f_s_fixed.clone();
        let mut fi = self.f_i_fixed.clone();
        for q in 0..3 {
            fs.axpy(cur[q], &self.f_s_phase[q], 1.0);
            fi.axpy(cur[q], &self.f_i_phase[q], 1.0);
        }
        for m in 0..ni {
            fi[(m + k) % ni] += self.f_i_r[m];
        }
        f.rows_mut(0, ns).copy_from(&fs);
        f.rows_mut(ns, nr).copy_from(&self.f_r);
        f.rows_mut(ns + nr, ni).copy_from(&fi);
        Ok(f)
    }

    /// `[Ψˢ ā_s | Ψʳ ā_r | a_I]`.
    pub fn lift(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        let (ns, nr, ni) = (self.n_s(), self.n_r(), self.dims.n_i);
        let d = self.dims;
        let mut a = DVector::zeros(d.total());
        a.rows_mut(0, d.n_s).copy_from(&(&self.psi_s * coefficients.rows(0, ns)));
        a.rows_mut(d.n_s, d.n_r).copy_from(&(&self.psi_r * coefficients.rows(ns, nr)));
        a.rows_mut(d.n_s + d.n_r, ni).copy_from(&coefficients.rows(ns + nr, ni));
        a
    }

    pub fn solve(&self, k: usize) -> Result<RomSolution> {
        let k = self.check_step(k)?;
        let f = self.rhs(k)?;
        let coefficients = if f.norm() == 0.0 {
            DVector::zeros(self.dim())
        } else {
            self.solve_rhs(k, &f)?
        };
        Ok(RomSolution {
            step: k,
            lifted: self.lift(&coefficients),
            coefficients,
        })
    }

    /// Solves the reduced system at step `k` by eliminating the interface block,
    /// with iterative refinement against the blockwise residual.
    pub fn solve_rhs(&self, k: usize, f: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.check_step(k)?;
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for a reduced system of size {}",
                f.len(),
                self.dim()
            )));
        }
        let fnorm = f.norm();
        if fnorm == 0.0 {
            return Ok(DVector::zeros(self.dim()));
        }
        let schur = self.schur(k)?;
        let mut x = schur.solve(f);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let r = f - self.apply(k, &x);
            rel = r.norm() / fnorm;
            if rel <= ROM_SOLVE_TOLERANCE * 1e-2 {
                break;
            }
            x += schur.solve(&r);
        }
        if rel > ROM_SOLVE_TOLERANCE || !rel.is_finite() {
            let r = f - self.apply(k, &x);
            rel = r.norm() / fnorm;
        }
        if rel > ROM_SOLVE_TOLERANCE || !rel.is_finite() {
            return Err(Error::SolverAccuracy {
                residual: rel,
                tolerance: ROM_SOLVE_TOLERANCE,
            });
        }
        Ok(x)
    }

    /// Reduced matrix-vector product at step `k`, formed blockwise.
    pub fn apply(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        let (ns, nr, ni) = (self.n_s(), self.n_r(), self.dims.n_i);
        let xs = x.rows(0, ns);
        let xr = x.rows(ns, nr);
        let xi = x.rows(ns + nr, ni).into_owned();
        let xi_rot = DVector::from_fn(ni, |m, _| xi[(m + k) % ni]);
        let mut y = DVector::zeros(self.dim());
        y.rows_mut(0, ns)
            .copy_from(&(&self.k_s * xs + &self.k_si * &xi));
        y.rows_mut(ns, nr)
            .copy_from(&(&self.k_r * xr + &self.k_ri * &xi_rot));
        let mut yi = spmv(&self.k_ii_s, xi.as_slice()) + self.k_si.tr_mul(&xs);
        let yr = spmv(&self.k_ii_r, xi_rot.as_slice()) + self.k_ri.tr_mul(&xr);
        for m in 0..ni {
            yi[(m + k) % ni] += yr[m];
        }
        y.rows_mut(ns + nr, ni).copy_from(&yi);
        y
    }

    fn schur(&self, k: usize) -> Result<Schur> {
        let (ns, nr, ni) = (self.n_s(), self.n_r(), self.dims.n_i);
        let (c, xs) = match &self.fixed_interface {
            Some((c, xs)) => (c.clone(), xs.clone()),
            None => {
                let c = Arc::new(SpdSolver::factor(
                    &interface_block(&self.k_ii_s, &self.k_ii_r, k, ni),
                    "interface block",
                )?);
                let xs = c.solve_many(&self.k_si.transpose());
                (c, xs)
            }
        };
        // rotor coupling with interface columns in the stator frame
        let mut b_r = DMatrix::zeros(nr, ni);
        for m in 0..ni {
            b_r.set_column((m + k) % ni, &self.k_ri.column(m));
        }
        let xr = c.solve_many(&b_r.transpose());
        let n = ns + nr;
        let mut s = DMatrix::zeros(n, n);
        s.view_mut((0, 0), (ns, ns)).copy_from(&(&self.k_s - &self.k_si * &xs));
        s.view_mut((ns, ns), (nr, nr)).copy_from(&(&self.k_r - &b_r * &xr));
        let sr = -(&self.k_si * &xr);
        s.view_mut((0, ns), (ns, nr)).copy_from(&sr);
        s.view_mut((ns, 0), (nr, ns)).copy_from(&sr.transpose());
        let s = (&s + s.transpose()) * 0.5;
        let factor = match s.clone().cholesky() {
            Some(ch) => SchurFactor::Cholesky(ch),
            None => SchurFactor::Lu(s.lu()),
        };
        Ok(Schur {
            ns,
            nr,
            c,
            xs,
            xr,
            b_r,
            k_si: self.k_si.clone(),
            factor,
        })
    }

    /// Dense reduced matrix, for inspection of small models.
    pub fn dense_matrix(&self, k: usize) -> Result<DMatrix<f64>> {
        Ok(to_dense(&self.matrix(k)?))
    }
}

enum SchurFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Interface-eliminated form of the reduced system at one step.
struct Schur {
    ns: usize,
    nr: usize,
    c: Arc<SpdSolver>,
    xs: DMatrix<f64>,
    xr: DMatrix<f64>,
    b_r: DMatrix<f64>,
    k_si: DMatrix<f64>,
    factor: SchurFactor,
}

impl Schur {
    fn solve(&self, f: &DVector<f64>) -> DVector<f64> {
        let (ns, nr) = (self.ns, self.nr);
        let ni = self.c.dim();
        let fi = f.rows(ns + nr, ni);
        let mut g = DVector::zeros(ns + nr);
        g.rows_mut(0, ns).copy_from(&(f.rows(0, ns) - self.xs.tr_mul(&fi)));
        g.rows_mut(ns, nr).copy_from(&(f.rows(ns, nr) - self.xr.tr_mul(&fi)));
        let c = match &self.factor {
            SchurFactor::Cholesky(ch) => ch.solve(&g),
            SchurFactor::Lu(lu) => lu.solve(&g).unwrap_or_else(|| DVector::from_element(ns + nr, f64::NAN)),
        };
        let cs = c.rows(0, ns);
        let cr = c.rows(ns, nr);
        let rhs_i = fi - self.k_si.tr_mul(&cs) - self.b_r.tr_mul(&cr);
        let ai = self.c.solve(rhs_i.as_slice());
        let mut x = DVector::zeros(ns + nr + ni);
        x.rows_mut(0, ns + nr).copy_from(&c);
        x.rows_mut(ns + nr, ni).copy_from(&ai);
        x
    }
}

/// `K_II^s + Pᵀ K_II^r P` for step `k`.
fn interface_block(k_ii_s: &CsrMatrix<f64>, k_ii_r: &CsrMatrix<f64>, k: usize, ni: usize) -> CsrMatrix<f64> {
    let t = entries(k_ii_s)
        .chain(entries(k_ii_r).map(|(i, j, v)| ((i + k) % ni, (j + k) % ni, v)));
    csr_from_triplets(ni, ni, t)
}

/// True when shifting the interface numbering by one leaves the matrix unchanged up to
/// rounding. Refinement against the exact blocks absorbs the remaining difference.
fn shift_invariant(m: &CsrMatrix<f64>, ni: usize) -> bool {
    if ni == 0 {
        return true;
    }
    let shifted = csr_from_triplets(ni, ni, entries(m).map(|(i, j, v)| ((i + 1) % ni, (j + 1) % ni, v)));
    crate::sparse::max_abs_diff(m, &shifted) <= 1e-12 * crate::sparse::max_abs(m)
}

pub fn solve_rom(model: &ReducedModel, k: usize) -> Result<RomSolution> {
    model.solve(k)
}

/// Stator and rotor rows of a block system as a standalone check of projection sizes.
pub fn block_rows(system: &BlockSystem) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
    let d = system.dims;
    let all = 0..d.total();
    (
        block(&system.stator, d.stator(), all.clone()),
        block(&system.rotor, d.rotor(), all),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{solve_full, FemModel};
    use crate::machine::MachineSpec;

    fn coarse() -> BlockSystem {
        FemModel::new(&MachineSpec::coarse()).unwrap().system().unwrap()
    }

    #[test]
    fn identity_bases_reproduce_full_solutions() {
        let sys = coarse();
        let d = sys.dims;
        let rom = ReducedModel::from_modes(
            &sys,
            &DMatrix::identity(d.n_s, d.n_s),
            &DMatrix::identity(d.n_r, d.n_r),
        )
        .unwrap();
        for k in [0, 7, 71] {
            let full = solve_full(&sys, k).unwrap();
            let red = rom.solve(k).unwrap();
            assert!((&full.a - &red.lifted).norm() <= 1e-9 * full.a.norm());
        }
    }

    #[test]
    fn one_mode_each_gives_small_symmetric_system() {
        let sys = coarse();
        let d = sys.dims;
        let mut ps = DMatrix::zeros(d.n_s, 1);
        ps[(3, 0)] = 1.0;
        let mut pr = DMatrix::zeros(d.n_r, 1);
        pr[(5, 0)] = 1.0;
        let rom = ReducedModel::from_modes(&sys, &ps, &pr).unwrap();
        let m = rom.dense_matrix(13).unwrap();
        assert_eq!(m.shape(), (2 + d.n_i, 2 + d.n_i));
        assert!((&m - m.transpose()).amax() == 0.0);
    }

    #[test]
    fn zero_load_gives_zero_coefficients() {
        let mut sys = coarse();
        sys.loads = crate::fem::LoadVectors::zeros(sys.dims.total());
        let d = sys.dims;
        let rom = ReducedModel::from_modes(&sys, &DMatrix::identity(d.n_s, 2), &DMatrix::identity(d.n_r, 2)).unwrap();
        assert_eq!(rom.solve(4).unwrap().coefficients.norm(), 0.0);
    }

    #[test]
    fn interface_elimination_matches_dense_solve() {
        let mut sys = coarse();
        let d = sys.dims;
        let ps = DMatrix::from_fn(d.n_s, 3, |i, j| ((i * (j + 3)) % 17) as f64 - 8.0);
        let pr = DMatrix::from_fn(d.n_r, 2, |i, j| ((i * (j + 5)) % 13) as f64 - 6.0);
        let check = |sys: &BlockSystem, cached: bool| {
            let rom = ReducedModel::from_modes(sys, &ps, &pr).unwrap();
            assert_eq!(rom.fixed_interface.is_some(), cached);
            for k in [0, 5, 77] {
                let f = rom.rhs(k).unwrap();
                let x = rom.solve(k).unwrap().coefficients;
                let dense = rom.dense_matrix(k).unwrap();
                let y = dense.clone().lu().solve(&f).unwrap();
                assert!((&x - &y).norm() <= 1e-8 * y.norm());
                assert!((&dense * &x - &rom.apply(k, &x)).norm() <= 1e-12 * f.norm());
            }
        };
        check(&sys, true);
        // break the rotational invariance of the rotor-side interface block
        let first = sys.k_ii_r.row_offsets()[0];
        sys.k_ii_r.values_mut()[first] *= 1.5;
        check(&sys, false);
    }

    #[test]
    fn mismatched_basis_is_rejected() {
        let sys = coarse();
        assert!(matches!(
            ReducedModel::from_modes(&sys, &DMatrix::identity(3, 1), &DMatrix::identity(sys.dims.n_r, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
