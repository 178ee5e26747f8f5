//! Affine decomposition of the stiffness and loads in the perturbation parameters.
//!
//! Tooth-tip triangles are deformed by a vertex displacement that is linear in the
//! tooth offset, so their Jacobian is `J(Δ) = J₀ + Δ J₁`. The P1 stiffness of such a
//! triangle is `ν ĝᵀ G ĝ` with reference gradients `ĝ` and the tensor
//! `G = |det J| J⁻¹ J⁻ᵀ / 2`, which is invariant under rotations of the triangle.
//! Triangles sharing `(J₀, J₁)` up to rotation, material and tooth form a group
//! whose three tensor entries are the Θ functions of three fixed matrices.

use std::collections::BTreeMap;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{
    check_region, reluctivity, remanence_direction, scatter_matrix, scatter_vector, LoadVectors,
    SideMatrices,
};
use crate::fem::element;
use crate::machine::MachineSpec;
use crate::mesh::{tooth_motion, DofPartition, Half, Mesh, Region};
use crate::sparse::{csr_from_triplets, entries};

/// Perturbation parameters: per-tooth radial offsets (m, positive shortens the
/// airgap) and per-magnet remanence deviation angles (rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub tooth_offsets: Vec<f64>,
    pub magnet_angles: Vec<f64>,
}

impl Parameters {
    pub fn nominal(n_teeth: usize, n_poles: usize) -> Self {
        Self {
            tooth_offsets: vec![0.0; n_teeth],
            magnet_angles: vec![0.0; n_poles],
        }
    }
}

const REFERENCE_GRADIENTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

type Mat2 = [[f64; 2]; 2];

/// Triangles of one tooth whose Jacobians coincide up to rotation.
#[derive(Debug, Clone)]
pub struct ToothGroup {
    pub tooth: usize,
    pub ring: usize,
    pub half: Half,
    /// Bit `a` set when vertex `a` moves with the tooth.
    pub moving: u8,
    pub nu: f64,
    pub members: Vec<usize>,
    j0: Mat2,
    j1: Mat2,
}

impl ToothGroup {
    /// Entries `(G_xx, G_xy, G_yy)` of the transformed tensor at tooth offset `offset`.
    pub fn theta(&self, offset: f64) -> [f64; 3] {
        let a = self.j0[0][0] + offset * self.j1[0][0];
        let b = self.j0[0][1] + offset * self.j1[0][1];
        let c = self.j0[1][0] + offset * self.j1[1][0];
        let d = self.j0[1][1] + offset * self.j1[1][1];
        let det = a * d - b * c;
        // adj(J) = [[d, -b], [-c, a]]
        let s = 0.5 / det;
        [s * (d * d + b * b), -s * (d * c + b * a), s * (c * c + a * a)]
    }
}

/// Jacobian columns `p1 - p0`, `p2 - p0` rotated by `-th`.
fn local_jacobian(p: &[[f64; 2]; 3], th: f64) -> Mat2 {
    let (s, c) = th.sin_cos();
    let rot = |v: [f64; 2]| [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
    let e1 = rot([p[1][0] - p[0][0], p[1][1] - p[0][1]]);
    let e2 = rot([p[2][0] - p[0][0], p[2][1] - p[0][1]]);
    [[e1[0], e2[0]], [e1[1], e2[1]]]
}

fn local_term_matrices(nu: f64) -> [[[f64; 3]; 3]; 3] {
    let g = REFERENCE_GRADIENTS;
    let mut out = [[[0.0; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[0][a][b] = nu * g[a][0] * g[b][0];
            out[1][a][b] = nu * (g[a][0] * g[b][1] + g[a][1] * g[b][0]);
            out[2][a][b] = nu * g[a][1] * g[b][1];
        }
    }
    out
}

/// Parameter-independent matrices and vectors plus the Θ functions that combine them.
#[derive(Debug, Clone)]
pub struct ParametricDecomposition {
    /// Stator-side stiffness of all triangles untouched by tooth motion (Θ ≡ 1).
    pub stator_fixed: CsrMatrix<f64>,
    /// Rotor-side stiffness (Θ ≡ 1).
    pub rotor: CsrMatrix<f64>,
    pub groups: Vec<ToothGroup>,
    /// Three matrices per group, for `G_xx`, `G_xy`, `G_yy`.
    pub group_matrices: Vec<[CsrMatrix<f64>; 3]>,
    /// Coil load of each phase for unit current density.
    pub phase_loads: [DVector<f64>; 3],
    /// Magnet loads per pole for remanence along the nominal axis (`cos φ` term) and
    /// perpendicular to it (`sin φ` term).
    pub magnet_cos: Vec<DVector<f64>>,
    pub magnet_sin: Vec<DVector<f64>>,
    /// Whether each magnet lies in the rotor.
    pub magnet_on_rotor: Vec<bool>,
    n_teeth: usize,
}

impl ParametricDecomposition {
    /// Builds the decomposition on the reference mesh.
    pub fn build(mesh: &Mesh, partition: &DofPartition, spec: &MachineSpec) -> Result<Self> {
        let n = partition.len();
        let motion = tooth_motion(mesh, spec);
        let step = mesh.angle_step();
        let na = mesh.n_angles;
        let mut fixed_s = Vec::new();
        let mut fixed_r = Vec::new();
        let mut phase_loads = [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)];
        let mut magnet_cos = vec![DVector::zeros(n); spec.n_poles];
        let mut magnet_sin = vec![DVector::zeros(n); spec.n_poles];
        let mut magnet_on_rotor = vec![true; spec.n_poles];
        let mut keyed: BTreeMap<(usize, usize, u8, u8, u64), ToothGroup> = BTreeMap::new();

        for (ti, t) in mesh.triangles.iter().enumerate() {
            check_region(t, ti, spec)?;
            let p = mesh.triangle_coords(t);
            let nu = reluctivity(t.region, spec);
            let mut moving = 0u8;
            let mut tooth = None;
            let mut disp = [[0.0; 2]; 3];
            for (a, &v) in t.vertices.iter().enumerate() {
                if let Some((k, w)) = motion[v] {
                    if tooth.is_some_and(|k0| k0 != k) {
                        return Err(Error::GroupDetection {
                            group: format!("triangle {ti}"),
                            detail: format!("triangle {ti} touches teeth {} and {k}", tooth.unwrap()),
                        });
                    }
                    tooth = Some(k);
                    moving |= 1 << a;
                    let th = mesh.angular_index(v) as f64 * step;
                    disp[a] = [-w * th.cos(), -w * th.sin()];
                }
            }

            match (t.region, tooth) {
                (Region::Coil { .. } | Region::Magnet(_), Some(_)) => {
                    return Err(Error::GroupDetection {
                        group: format!("triangle {ti}"),
                        detail: format!("source region {} touches a moving tooth", t.region.name()),
                    })
                }
                (Region::Coil { phase, positive, .. }, None) => {
                    let f = element::source_load(&p, if positive { 1.0 } else { -1.0 }, ti)?;
                    scatter_vector(partition, &t.vertices, &f, &mut phase_loads[phase]);
                }
                (Region::Magnet(m), None) => {
                    let e = remanence_direction(spec, m, 0.0);
                    let e_perp = [-e[1], e[0]];
                    let br = spec.remanence;
                    let fc = element::magnet_load(&p, nu, [br * e[0], br * e[1]], ti)?;
                    let fs = element::magnet_load(&p, nu, [br * e_perp[0], br * e_perp[1]], ti)?;
                    scatter_vector(partition, &t.vertices, &fc, &mut magnet_cos[m]);
                    scatter_vector(partition, &t.vertices, &fs, &mut magnet_sin[m]);
                    magnet_on_rotor[m] = mesh.is_rotor_triangle(t);
                }
                _ => {}
            }

            let Some(tooth) = tooth else {
                let k = element::stiffness(&p, nu, ti)?;
                let dst = if mesh.is_rotor_triangle(t) {
                    &mut fixed_r
                } else {
                    &mut fixed_s
                };
                scatter_matrix(partition, &t.vertices, &k, dst);
                continue;
            };
            if mesh.is_rotor_triangle(t) {
                return Err(Error::GroupDetection {
                    group: format!("triangle {ti}"),
                    detail: "tooth motion reaches a rotor triangle".into(),
                });
            }
            // degenerate reference triangles are reported by the element routine
            element::gradients(&p, ti)?;
            let th = mesh.angular_index(t.vertices[0]) as f64 * step;
            let j0 = local_jacobian(&p, th);
            let (s, c) = th.sin_cos();
            let rot = |v: [f64; 2]| [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
            let d1 = rot([disp[1][0] - disp[0][0], disp[1][1] - disp[0][1]]);
            let d2 = rot([disp[2][0] - disp[0][0], disp[2][1] - disp[0][1]]);
            let j1 = [[d1[0], d2[0]], [d1[1], d2[1]]];
            let half = match t.half {
                Half::Lower => 0,
                Half::Upper => 1,
            };
            let key = (tooth, t.ring, half, moving, nu.to_bits());
            let group = keyed.entry(key).or_insert_with(|| ToothGroup {
                tooth,
                ring: t.ring,
                half: t.half,
                moving,
                nu,
                members: Vec::new(),
                j0,
                j1,
            });
            let scale = group.j0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let dev0 = max_diff(&group.j0, &j0);
            let dev1 = max_diff(&group.j1, &j1);
            if dev0 > 1e-12 * scale || dev1 > 1e-12 {
                return Err(Error::GroupDetection {
                    group: format!("tooth {tooth} ring {} half {half} mask {moving:03b}", t.ring),
                    detail: format!(
                        "triangle {ti} (tooth {tooth}, ring {}, cell {}) is not congruent to its \
                         group: Jacobian deviation {dev0:.3e}, motion deviation {dev1:.3e}",
                        t.ring,
                        t.cell % na
                    ),
                });
            }
            group.members.push(ti);
        }

        let groups: Vec<ToothGroup> = keyed.into_values().collect();
        let group_matrices = groups
            .iter()
            .map(|g| {
                let local = local_term_matrices(g.nu);
                let mut trips: [Vec<(usize, usize, f64)>; 3] = Default::default();
                for &ti in &g.members {
                    let verts = &mesh.triangles[ti].vertices;
                    for e in 0..3 {
                        scatter_matrix(partition, verts, &local[e], &mut trips[e]);
                    }
                }
                trips.map(|t| csr_from_triplets(n, n, t))
            })
            .collect();

        Ok(Self {
            stator_fixed: csr_from_triplets(n, n, fixed_s),
            rotor: csr_from_triplets(n, n, fixed_r),
            groups,
            group_matrices,
            phase_loads,
            magnet_cos,
            magnet_sin,
            magnet_on_rotor,
            n_teeth: spec.n_teeth(),
        })
    }

    pub fn n_teeth(&self) -> usize {
        self.n_teeth
    }

    pub fn n_poles(&self) -> usize {
        self.magnet_cos.len()
    }

    /// Number of parameter-dependent stiffness terms.
    pub fn n_parametric_stiffness_terms(&self) -> usize {
        3 * self.groups.len()
    }

    /// Parameter-dependent stiffness terms of one tooth.
    pub fn terms_per_tooth(&self, tooth: usize) -> usize {
        3 * self.groups.iter().filter(|g| g.tooth == tooth).count()
    }

    fn check(&self, params: &Parameters) -> Result<()> {
        if params.tooth_offsets.len() != self.n_teeth || params.magnet_angles.len() != self.n_poles()
        {
            return Err(Error::DimensionMismatch(format!(
                "parameters have {} tooth offsets and {} magnet angles, expected {} and {}",
                params.tooth_offsets.len(),
                params.magnet_angles.len(),
                self.n_teeth,
                self.n_poles()
            )));
        }
        Ok(())
    }

    /// `(Θ_j, K_j)` for every stiffness term, the fixed stator term first.
    pub fn stiffness_terms<'a>(
        &'a self,
        params: &Parameters,
    ) -> Result<Vec<(f64, &'a CsrMatrix<f64>)>> {
        self.check(params)?;
        let mut out = vec![(1.0, &self.stator_fixed)];
        for (g, mats) in self.groups.iter().zip(&self.group_matrices) {
            let th = g.theta(params.tooth_offsets[g.tooth]);
            for e in 0..3 {
                out.push((th[e], &mats[e]));
            }
        }
        Ok(out)
    }

    /// `Σ Θ_j K_j` split by side.
    pub fn evaluate_stiffness(&self, params: &Parameters) -> Result<SideMatrices> {
        let n = self.stator_fixed.nrows();
        let terms = self.stiffness_terms(params)?;
        let trips = terms
            .iter()
            .flat_map(|(th, m)| entries(m).map(move |(i, j, v)| (i, j, th * v)));
        Ok(SideMatrices {
            stator: csr_from_triplets(n, n, trips),
            rotor: self.rotor.clone(),
        })
    }

    /// Magnet loads `Σ_p cos φ_p f_p^c + sin φ_p f_p^s`, split by side.
    pub fn evaluate_loads(&self, params: &Parameters) -> Result<LoadVectors> {
        self.check(params)?;
        let n = self.stator_fixed.nrows();
        let mut out = LoadVectors::zeros(n);
        out.phase = self.phase_loads.clone();
        for (p, &phi) in params.magnet_angles.iter().enumerate() {
            let (s, c) = phi.sin_cos();
            let dst = if self.magnet_on_rotor[p] {
                &mut out.rotor
            } else {
                &mut out.stator_fixed
            };
            dst.axpy(c, &self.magnet_cos[p], 1.0);
            dst.axpy(s, &self.magnet_sin[p], 1.0);
        }
        Ok(out)
    }
}

fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}
