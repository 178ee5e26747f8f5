//! Stator/rotor/interface block system and the locked-step rotation.
//!
//! Dofs are ordered `[static | rotating | interface]`. Rotating dofs keep their
//! rotor-frame numbering for every angle; interface dofs are numbered by the
//! stator-frame angular index. Turning the rotor by `k` steps counter-clockwise
//! brings its interface node `m` onto stator interface node `m + k`, so the
//! rotor-side contribution at step `k` is the reference one with its interface
//! rows and columns shifted by `k`.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{LoadVectors, SideMatrices};
use crate::machine::ThreePhase;
use crate::mesh::DofPartition;
use crate::pod::SnapshotSet;
use crate::sparse::{block, csr_from_triplets, entries, solve_refined, spmv};

/// Residual tolerance of full-order solves.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Sizes of the three dof blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDims {
    pub n_s: usize,
    pub n_r: usize,
    pub n_i: usize,
}

impl BlockDims {
    pub fn of(partition: &DofPartition) -> Self {
        Self {
            n_s: partition.n_static(),
            n_r: partition.n_rotating(),
            n_i: partition.n_interface(),
        }
    }

    pub fn total(&self) -> usize {
        self.n_s + self.n_r + self.n_i
    }

    pub fn stator(&self) -> std::ops::Range<usize> {
        0..self.n_s
    }

    pub fn rotor(&self) -> std::ops::Range<usize> {
        self.n_s..self.n_s + self.n_r
    }

    pub fn interface(&self) -> std::ops::Range<usize> {
        self.n_s + self.n_r..self.total()
    }

    /// Position at step `k` of a rotor-side dof given in the reference numbering.
    #[inline]
    pub fn rotate(&self, dof: usize, k: usize) -> usize {
        let i0 = self.n_s + self.n_r;
        if dof < i0 {
            dof
        } else {
            i0 + (dof - i0 + k) % self.n_i
        }
    }
}

/// The assembled system at the reference angle together with its pieces.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub dims: BlockDims,
    /// Stator-side stiffness over all dofs.
    pub stator: CsrMatrix<f64>,
    /// Rotor-side stiffness over all dofs, rotor frame.
    pub rotor: CsrMatrix<f64>,
    pub k_ss: CsrMatrix<f64>,
    pub k_si: CsrMatrix<f64>,
    pub k_ii_s: CsrMatrix<f64>,
    pub k_rr: CsrMatrix<f64>,
    pub k_ri: CsrMatrix<f64>,
    pub k_ii_r: CsrMatrix<f64>,
    pub loads: LoadVectors,
    pub currents: ThreePhase,
}

/// System matrix and right-hand side at one rotor position.
#[derive(Debug, Clone)]
pub struct RotatedSystem {
    pub step: usize,
    pub matrix: CsrMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Interface-dependent blocks at one rotor position.
#[derive(Debug, Clone)]
pub struct RotatedBlocks {
    pub k_ri: CsrMatrix<f64>,
    pub k_ii: CsrMatrix<f64>,
    pub f_i: DVector<f64>,
}

impl BlockSystem {
    pub fn new(
        partition: &DofPartition,
        sides: SideMatrices,
        loads: LoadVectors,
        currents: ThreePhase,
    ) -> Result<Self> {
        let dims = BlockDims::of(partition);
        let n = dims.total();
        if sides.stator.nrows() != n || sides.rotor.nrows() != n || loads.rotor.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "side matrices/loads do not match {n} dofs"
            )));
        }
        let (s, r, i) = (dims.stator(), dims.rotor(), dims.interface());
        for (name, m) in [("stator", &sides.stator), ("rotor", &sides.rotor)] {
            let forbidden = if name == "stator" { &r } else { &s };
            if entries(m).any(|(a, b, v)| v != 0.0 && (forbidden.contains(&a) || forbidden.contains(&b)))
            {
                return Err(Error::DimensionMismatch(format!(
                    "{name}-side matrix couples to the other side"
                )));
            }
        }
        Ok(Self {
            dims,
            k_ss: block(&sides.stator, s.clone(), s.clone()),
            k_si: block(&sides.stator, s.clone(), i.clone()),
            k_ii_s: block(&sides.stator, i.clone(), i.clone()),
            k_rr: block(&sides.rotor, r.clone(), r.clone()),
            k_ri: block(&sides.rotor, r, i.clone()),
            k_ii_r: block(&sides.rotor, i.clone(), i),
            stator: sides.stator,
            rotor: sides.rotor,
            loads,
            currents,
        })
    }

    pub fn n_angles(&self) -> usize {
        self.dims.n_i
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.dims.n_i as f64
    }

    /// Accepts `0 ..= n_angles`; `n_angles` is a full turn and maps to 0.
    pub fn check_step(&self, k: usize) -> Result<usize> {
        if k > self.dims.n_i {
            return Err(Error::AngleOutOfRange {
                step: k,
                n_angles: self.dims.n_i,
            });
        }
        Ok(k % self.dims.n_i)
    }

    /// Stator-side load at step `k` (coil currents evaluated at the rotor angle).
    pub fn stator_load(&self, k: usize) -> DVector<f64> {
        let cur = self.currents.currents(self.angle(k));
        let mut f = self.loads.stator_fixed.clone();
        for q in 0..3 {
            f.axpy(cur[q], &self.loads.phase[q], 1.0);
        }
        f
    }

    /// Rotor-side vector moved to step `k`.
    pub fn rotate_vector(&self, v: &DVector<f64>, k: usize) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (d, x) in v.iter().enumerate() {
            out[self.dims.rotate(d, k)] = *x;
        }
        out
    }

    /// Inverse of [`rotate_vector`](Self::rotate_vector).
    pub fn unrotate_vector(&self, v: &DVector<f64>, k: usize) -> DVector<f64> {
        DVector::from_iterator(v.len(), (0..v.len()).map(|d| v[self.dims.rotate(d, k)]))
    }

    pub fn rhs(&self, k: usize) -> Result<DVector<f64>> {
        let k = self.check_step(k)?;
        Ok(self.stator_load(k) + self.rotate_vector(&self.loads.rotor, k))
    }

    /// Rotor-side matrix with interface indices shifted by `k`.
    pub fn rotated_rotor(&self, k: usize) -> Result<CsrMatrix<f64>> {
        let k = self.check_step(k)?;
        let n = self.dims.total();
        Ok(csr_from_triplets(
            n,
            n,
            entries(&self.rotor).map(|(i, j, v)| (self.dims.rotate(i, k), self.dims.rotate(j, k), v)),
        ))
    }

    /// The system at step `k` by index shift of the reference rotor side.
    pub fn rotated(&self, k: usize) -> Result<RotatedSystem> {
        let k = self.check_step(k)?;
        let n = self.dims.total();
        let trips = entries(&self.stator).chain(
            entries(&self.rotor).map(|(i, j, v)| (self.dims.rotate(i, k), self.dims.rotate(j, k), v)),
        );
        Ok(RotatedSystem {
            step: k,
            matrix: csr_from_triplets(n, n, trips),
            rhs: self.rhs(k)?,
        })
    }

    /// `K^rI(ϑ_k)`, `K^II(ϑ_k)` and `f^I(ϑ_k)` in block form.
    pub fn rotated_blocks(&self, k: usize) -> Result<RotatedBlocks> {
        let k = self.check_step(k)?;
        let ni = self.dims.n_i;
        let shift = |m: usize| (m + k) % ni;
        let k_ri = csr_from_triplets(
            self.dims.n_r,
            ni,
            entries(&self.k_ri).map(|(i, j, v)| (i, shift(j), v)),
        );
        let k_ii = csr_from_triplets(
            ni,
            ni,
            entries(&self.k_ii_s)
                .chain(entries(&self.k_ii_r).map(|(i, j, v)| (shift(i), shift(j), v))),
        );
        let f = self.rhs(k)?;
        Ok(RotatedBlocks {
            k_ri,
            k_ii,
            f_i: f.rows_range(self.dims.interface()).into_owned(),
        })
    }

    /// `K(ϑ_k) x` without forming the rotated matrix.
    pub fn apply(&self, k: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.check_step(k)?;
        let mut y = spmv(&self.stator, x.as_slice());
        let xr = self.unrotate_vector(x, k);
        let yr = spmv(&self.rotor, xr.as_slice());
        for (d, v) in yr.iter().enumerate() {
            y[self.dims.rotate(d, k)] += v;
        }
        Ok(y)
    }
}

/// Full-order solution at one rotor position.
#[derive(Debug, Clone)]
pub struct FullSolution {
    pub step: usize,
    pub a: DVector<f64>,
    pub dims: BlockDims,
    /// `‖f − K a‖ / ‖f‖`.
    pub residual: f64,
}

impl FullSolution {
    pub fn a_s(&self) -> nalgebra::DVectorView<'_, f64> {
        self.a.rows_range(self.dims.stator())
    }

    pub fn a_r(&self) -> nalgebra::DVectorView<'_, f64> {
        self.a.rows_range(self.dims.rotor())
    }

    pub fn a_i(&self) -> nalgebra::DVectorView<'_, f64> {
        self.a.rows_range(self.dims.interface())
    }
}

pub fn solve_rotated(sys: &RotatedSystem, dims: BlockDims) -> Result<FullSolution> {
    if sys.rhs.norm() == 0.0 {
        return Ok(FullSolution {
            step: sys.step,
            a: DVector::zeros(sys.rhs.len()),
            dims,
            residual: 0.0,
        });
    }
    let (a, residual) = solve_refined(&sys.matrix, &sys.rhs, SOLVE_TOLERANCE, "full-order system")?;
    Ok(FullSolution {
        step: sys.step,
        a,
        dims,
        residual,
    })
}

pub fn solve_full(system: &BlockSystem, k: usize) -> Result<FullSolution> {
    solve_rotated(&system.rotated(k)?, system.dims)
}

/// Wall time of a sweep.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SweepTiming {
    pub wall: Duration,
    pub solves: usize,
}

impl SweepTiming {
    pub fn seconds(&self) -> f64 {
        self.wall.as_secs_f64()
    }
}

/// Solves every step of `steps`; columns are ordered by step.
pub fn sweep_full(system: &BlockSystem, steps: &[usize]) -> Result<(SnapshotSet, SweepTiming)> {
    let mut sorted = steps.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateAngle(w[0]));
        }
    }
    for &k in &sorted {
        if k >= system.n_angles() {
            return Err(Error::AngleOutOfRange {
                step: k,
                n_angles: system.n_angles(),
            });
        }
    }
    let start = Instant::now();
    let sols: Vec<FullSolution> = sorted
        .par_iter()
        .map(|&k| solve_full(system, k))
        .collect::<Result<_>>()?;
    let wall = start.elapsed();
    let cols: Vec<DVector<f64>> = sols.into_iter().map(|s| s.a).collect();
    let set = SnapshotSet::new(sorted, &cols, system.dims)?;
    Ok((
        set,
        SweepTiming {
            wall,
            solves: cols.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FemModel;
    use crate::machine::MachineSpec;
    use crate::sparse::{max_abs, max_abs_diff};

    fn coarse() -> BlockSystem {
        FemModel::new(&MachineSpec::coarse()).unwrap().system().unwrap()
    }

    #[test]
    fn zero_and_full_turn_are_the_reference() {
        let sys = coarse();
        let r0 = sys.rotated(0).unwrap();
        let rn = sys.rotated(sys.n_angles()).unwrap();
        assert_eq!(max_abs_diff(&r0.matrix, &rn.matrix), 0.0);
        assert_eq!(r0.rhs, rn.rhs);
        let full = crate::sparse::add_scaled(&sys.stator, &sys.rotor, 1.0);
        assert_eq!(max_abs_diff(&r0.matrix, &full), 0.0);
        assert!(matches!(
            sys.rotated(sys.n_angles() + 1),
            Err(Error::AngleOutOfRange { .. })
        ));
    }

    #[test]
    fn apply_matches_rotated_matrix() {
        let sys = coarse();
        let n = sys.dims.total();
        let x = DVector::from_fn(n, |i, _| ((i * 7919) % 101) as f64 - 50.0);
        for k in [0, 1, 17, 100] {
            let m = sys.rotated(k).unwrap().matrix;
            let y = spmv(&m, x.as_slice());
            let z = sys.apply(k, &x).unwrap();
            assert!((y - z).amax() <= 1e-12 * max_abs(&m) * x.amax());
        }
    }

    #[test]
    fn block_views_agree_with_rotated_matrix() {
        let sys = coarse();
        let k = 23;
        let rs = sys.rotated(k).unwrap();
        let b = sys.rotated_blocks(k).unwrap();
        let d = sys.dims;
        assert_eq!(max_abs_diff(&block(&rs.matrix, d.rotor(), d.interface()), &b.k_ri), 0.0);
        assert!(max_abs_diff(&block(&rs.matrix, d.interface(), d.interface()), &b.k_ii) <= 1e-9);
        assert_eq!(max_abs_diff(&block(&rs.matrix, d.stator(), d.stator()), &sys.k_ss), 0.0);
        assert_eq!(max_abs_diff(&block(&rs.matrix, d.rotor(), d.rotor()), &sys.k_rr), 0.0);
    }

    #[test]
    fn rotor_block_is_shift_invariant() {
        // the unperturbed rotor mesh maps onto itself when all rotor indices shift by one
        let model = FemModel::new(&MachineSpec::coarse()).unwrap();
        let sys = model.system().unwrap();
        let mesh = &model.mesh;
        let part = &model.partition;
        let na = mesh.n_angles;
        let shift_node = |node: usize| mesh.node(mesh.ring_of(node), (mesh.angular_index(node) + 1) % na);
        let perm: Vec<usize> = part
            .rotating_nodes
            .iter()
            .map(|&n| part.dof(shift_node(n)).unwrap() - part.n_static())
            .collect();
        let shifted = csr_from_triplets(
            sys.dims.n_r,
            sys.dims.n_r,
            entries(&sys.k_rr).map(|(i, j, v)| (perm[i], perm[j], v)),
        );
        assert!(max_abs_diff(&shifted, &sys.k_rr) <= 1e-12 * max_abs(&sys.k_rr));
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let mut sys = coarse();
        sys.loads = LoadVectors::zeros(sys.dims.total());
        let s = solve_full(&sys, 5).unwrap();
        assert_eq!(s.a.norm(), 0.0);
    }

    #[test]
    fn residual_contract_and_duplicate_rejection() {
        let sys = coarse();
        let (set, t) = sweep_full(&sys, &[9, 3, 40]).unwrap();
        assert_eq!(set.steps, vec![3, 9, 40]);
        assert_eq!(t.solves, 3);
        for (c, &k) in set.steps.iter().enumerate() {
            let f = sys.rhs(k).unwrap();
            let r = &f - sys.apply(k, &set.matrix.column(c).into_owned()).unwrap();
            assert!(r.norm() <= 1e-10 * f.norm());
        }
        assert!(matches!(sweep_full(&sys, &[1, 2, 1]), Err(Error::DuplicateAngle(1))));
    }
}
