//! Direct assembly of stiffness and load contributions on a (possibly perturbed) mesh.
//!
//! Contributions are kept per side of the interface: the stator side collects
//! triangles outside Γ_I, the rotor side those inside. Both are square matrices
//! over all free dofs in `[static | rotating | interface]` order, expressed in the
//! rotor frame at ϑ = 0.

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fem::element;
use crate::machine::MachineSpec;
use crate::mesh::{DofPartition, Mesh, Region, Triangle};
use crate::sparse::csr_from_triplets;

/// Stiffness contributions of the two sides of the interface.
#[derive(Debug, Clone)]
pub struct SideMatrices {
    pub stator: CsrMatrix<f64>,
    pub rotor: CsrMatrix<f64>,
}

/// Load contributions split by side and by excitation.
#[derive(Debug, Clone)]
pub struct LoadVectors {
    /// Coil load of each phase for unit current density (stator side).
    pub phase: [DVector<f64>; 3],
    /// Magnet load on the stator side (zero for the surrogate geometry).
    pub stator_fixed: DVector<f64>,
    /// Magnet load on the rotor side.
    pub rotor: DVector<f64>,
}

impl LoadVectors {
    pub fn zeros(n: usize) -> Self {
        Self {
            phase: [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)],
            stator_fixed: DVector::zeros(n),
            rotor: DVector::zeros(n),
        }
    }
}

pub fn reluctivity(region: Region, spec: &MachineSpec) -> f64 {
    match region {
        Region::RotorIron | Region::Tooth(_) | Region::StatorYoke => spec.nu_iron(),
        Region::Magnet(_) => spec.nu_magnet(),
        Region::Air | Region::Coil { .. } => spec.nu_air(),
    }
}

pub(crate) fn check_region(t: &Triangle, index: usize, spec: &MachineSpec) -> Result<()> {
    let bad = |detail: String| {
        Err(Error::UnknownRegion {
            triangle: index,
            detail,
        })
    };
    match t.region {
        Region::Magnet(p) if p >= spec.n_poles => bad(format!("magnet {p} of {}", spec.n_poles)),
        Region::Tooth(k) if k >= spec.n_teeth() => bad(format!("tooth {k} of {}", spec.n_teeth())),
        Region::Coil { phase, .. } if phase >= 3 => bad(format!("phase {phase}")),
        Region::Coil { slot, .. } if slot >= spec.n_teeth() => bad(format!("slot {slot}")),
        _ => Ok(()),
    }
}

/// Stiffness over all mesh nodes (Dirichlet nodes included), for a per-triangle
/// reluctivity.
pub fn assemble_node_stiffness(
    mesh: &Mesh,
    nu: impl Fn(&Triangle) -> f64,
) -> Result<CsrMatrix<f64>> {
    let n = mesh.n_nodes();
    let mut trips = Vec::with_capacity(9 * mesh.triangles.len());
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let k = element::stiffness(&mesh.triangle_coords(t), nu(t), ti)?;
        for a in 0..3 {
            for b in 0..3 {
                trips.push((t.vertices[a], t.vertices[b], k[a][b]));
            }
        }
    }
    Ok(csr_from_triplets(n, n, trips))
}

/// P1 stiffness `∫ ν ∇φ_i·∇φ_j` restricted to free dofs and split by side.
pub fn assemble_stiffness(
    mesh: &Mesh,
    partition: &DofPartition,
    spec: &MachineSpec,
) -> Result<SideMatrices> {
    let n = partition.len();
    let mut stator = Vec::new();
    let mut rotor = Vec::new();
    for (ti, t) in mesh.triangles.iter().enumerate() {
        check_region(t, ti, spec)?;
        let k = element::stiffness(&mesh.triangle_coords(t), reluctivity(t.region, spec), ti)?;
        let dst = if mesh.is_rotor_triangle(t) {
            &mut rotor
        } else {
            &mut stator
        };
        scatter_matrix(partition, &t.vertices, &k, dst);
    }
    Ok(SideMatrices {
        stator: csr_from_triplets(n, n, stator),
        rotor: csr_from_triplets(n, n, rotor),
    })
}

pub(crate) fn scatter_matrix(
    partition: &DofPartition,
    vertices: &[usize; 3],
    k: &[[f64; 3]; 3],
    out: &mut Vec<(usize, usize, f64)>,
) {
    for a in 0..3 {
        let Some(da) = partition.dof(vertices[a]) else { continue };
        for b in 0..3 {
            if let Some(db) = partition.dof(vertices[b]) {
                out.push((da, db, k[a][b]));
            }
        }
    }
}

pub(crate) fn scatter_vector(
    partition: &DofPartition,
    vertices: &[usize; 3],
    f: &[f64; 3],
    out: &mut DVector<f64>,
) {
    for a in 0..3 {
        if let Some(d) = partition.dof(vertices[a]) {
            out[d] += f[a];
        }
    }
}

/// Unit remanence direction of magnet `p` deviated by `phi`.
pub fn remanence_direction(spec: &MachineSpec, p: usize, phi: f64) -> [f64; 2] {
    let e = spec.magnet_axis(p);
    let (s, c) = phi.sin_cos();
    [c * e[0] - s * e[1], s * e[0] + c * e[1]]
}

/// Coil loads per phase (unit current density) and magnet loads at the machine's
/// magnet angles.
pub fn assemble_loads(mesh: &Mesh, partition: &DofPartition, spec: &MachineSpec) -> Result<LoadVectors> {
    let n = partition.len();
    let mut out = LoadVectors::zeros(n);
    for (ti, t) in mesh.triangles.iter().enumerate() {
        check_region(t, ti, spec)?;
        let p = mesh.triangle_coords(t);
        match t.region {
            Region::Coil {
                phase, positive, ..
            } => {
                let sign = if positive { 1.0 } else { -1.0 };
                let f = element::source_load(&p, sign, ti)?;
                scatter_vector(partition, &t.vertices, &f, &mut out.phase[phase]);
            }
            Region::Magnet(m) => {
                let dir = remanence_direction(spec, m, spec.magnet_angle(m));
                let b = [spec.remanence * dir[0], spec.remanence * dir[1]];
                let f = element::magnet_load(&p, spec.nu_magnet(), b, ti)?;
                let dst = if mesh.is_rotor_triangle(t) {
                    &mut out.rotor
                } else {
                    &mut out.stator_fixed
                };
                scatter_vector(partition, &t.vertices, &f, dst);
            }
            _ => {}
        }
    }
    Ok(out)
}
