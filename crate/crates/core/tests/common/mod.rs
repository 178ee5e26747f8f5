#![allow(dead_code)]

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use pmsm_rom::fem::{assemble_loads, assemble_stiffness, BlockSystem, FemModel};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::sparse::{add_scaled, max_abs, max_abs_diff};

/// Brute-force system at step `k`: the rotor submesh is turned by `k Δϑ` in
/// physical coordinates, its interface vertices are re-attached to the stator
/// interface nodes they now coincide with, and everything is assembled again.
pub fn physically_rotated(model: &FemModel, k: usize) -> (CsrMatrix<f64>, DVector<f64>) {
    let spec = &model.spec;
    let mut mesh = model.perturbed_mesh().unwrap();
    let iring = mesh.interface_ring;
    let th = k as f64 * mesh.angle_step();
    let (s, c) = th.sin_cos();
    for node in 0..mesh.n_nodes() {
        if mesh.ring_of(node) < iring {
            let [x, y] = mesh.nodes[node];
            mesh.nodes[node] = [c * x - s * y, s * x + c * y];
        }
    }
    for t in 0..mesh.triangles.len() {
        if mesh.triangles[t].ring < iring {
            for v in 0..3 {
                let node = mesh.triangles[t].vertices[v];
                if mesh.ring_of(node) == iring {
                    mesh.triangles[t].vertices[v] = mesh.node(iring, mesh.angular_index(node) + k);
                }
            }
        }
    }
    let sides = assemble_stiffness(&mesh, &model.partition, spec).unwrap();
    let matrix = add_scaled(&sides.stator, &sides.rotor, 1.0);

    // the magnets turn with the rotor, so their remanence turns as well
    let mut turned = spec.clone();
    turned.magnet_angles = (0..spec.n_poles).map(|p| spec.magnet_angle(p) + th).collect();
    let loads = assemble_loads(&mesh, &model.partition, &turned).unwrap();
    let system = model.system().unwrap();
    let cur = system.currents.currents(system.angle(k));
    let mut rhs = loads.stator_fixed + loads.rotor;
    for q in 0..3 {
        rhs.axpy(cur[q], &loads.phase[q], 1.0);
    }
    (matrix, rhs)
}

/// Largest entrywise deviation of the index-shift system from the brute-force one,
/// relative to the largest entry (matrix, right-hand side).
pub fn locked_step_deviation(model: &FemModel, system: &BlockSystem, k: usize) -> (f64, f64) {
    let (m, f) = physically_rotated(model, k);
    let rot = system.rotated(k).unwrap();
    let dm = max_abs_diff(&rot.matrix, &m) / max_abs(&m);
    let df = (&rot.rhs - &f).amax() / f.amax();
    (dm, df)
}

/// Scenario-like spec: magnet `p` turned by `phi`, tooth `t` moved by `offset`.
pub fn perturbed(base: &MachineSpec, p: usize, phi: f64, t: usize, offset: f64) -> MachineSpec {
    let mut s = base.clone();
    s.perturb_magnet(p, phi);
    s.perturb_tooth(t, offset);
    s
}
