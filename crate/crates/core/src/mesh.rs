//! Structured polar triangulation of the machine cross-section.
//!
//! Nodes sit on concentric rings at `n_angles` equidistant angles; node `j` of ring
//! `i` has index `i * n_angles + j` and angle `j · 2π / n_angles`. Each annular cell
//! between rings `i`, `i+1` and angles `j`, `j+1` is split along the diagonal from
//! `(i, j)` to `(i+1, j+1)`, the same way everywhere, so the triangulation is
//! invariant under a shift of the angular index.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{Band, MachineSpec, N_BANDS};

/// Material/source region of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    RotorIron,
    Magnet(usize),
    Air,
    Tooth(usize),
    Coil { slot: usize, phase: usize, positive: bool },
    StatorYoke,
}

impl Region {
    /// Integer tag used by the text export.
    pub fn tag(&self) -> usize {
        match *self {
            Region::RotorIron => 0,
            Region::Air => 1,
            Region::StatorYoke => 2,
            Region::Magnet(p) => 1000 + p,
            Region::Tooth(t) => 2000 + t,
            Region::Coil { slot, .. } => 3000 + slot,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Region::RotorIron => "rotor_iron".into(),
            Region::Air => "air".into(),
            Region::StatorYoke => "stator_yoke".into(),
            Region::Magnet(p) => format!("magnet_{p}"),
            Region::Tooth(t) => format!("tooth_{t}"),
            Region::Coil {
                slot,
                phase,
                positive,
            } => format!(
                "coil_{slot}_phase_{}{}",
                ["a", "b", "c"][phase % 3],
                if positive { "+" } else { "-" }
            ),
        }
    }

    /// The region one pole further round the machine (magnets and teeth advance
    /// by one pole pitch, coil polarity flips).
    pub fn shifted_by_poles(&self, poles: usize, spec: &MachineSpec) -> Region {
        let np = spec.n_poles;
        let nt = spec.n_teeth();
        match *self {
            Region::Magnet(p) => Region::Magnet((p + poles) % np),
            Region::Tooth(t) => Region::Tooth((t + poles * spec.slots_per_pole) % nt),
            Region::Coil {
                slot,
                phase,
                positive,
            } => Region::Coil {
                slot: (slot + poles * spec.slots_per_pole) % nt,
                phase,
                positive: positive ^ (poles % 2 == 1),
            },
            r => r,
        }
    }
}

/// Role of a node in the stator/rotor/interface split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Static,
    Rotating,
    Interface,
    Dirichlet,
}

impl NodeClass {
    fn code(&self) -> &'static str {
        match self {
            NodeClass::Static => "s",
            NodeClass::Rotating => "r",
            NodeClass::Interface => "I",
            NodeClass::Dirichlet => "D",
        }
    }
}

/// Which of the two triangles of an annular cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Half {
    /// `(i,j) (i+1,j) (i+1,j+1)`
    Lower,
    /// `(i,j) (i+1,j+1) (i,j+1)`
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub region: Region,
    /// Inner ring of the cell.
    pub ring: usize,
    /// Angular cell index.
    pub cell: usize,
    pub half: Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub node_class: Vec<NodeClass>,
    pub n_angles: usize,
    pub ring_radii: Vec<f64>,
    pub interface_ring: usize,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_rings(&self) -> usize {
        self.ring_radii.len()
    }

    pub fn node(&self, ring: usize, j: usize) -> usize {
        ring * self.n_angles + j % self.n_angles
    }

    pub fn ring_of(&self, node: usize) -> usize {
        node / self.n_angles
    }

    pub fn angular_index(&self, node: usize) -> usize {
        node % self.n_angles
    }

    pub fn angle_step(&self) -> f64 {
        2.0 * PI / self.n_angles as f64
    }

    /// Triangles on the rotor side of the interface.
    pub fn is_rotor_triangle(&self, t: &Triangle) -> bool {
        t.ring < self.interface_ring
    }

    pub fn triangle_coords(&self, t: &Triangle) -> [[f64; 2]; 3] {
        t.vertices.map(|v| self.nodes[v])
    }

    pub fn signed_area(&self, t: &Triangle) -> f64 {
        crate::fem::element::signed_area(&self.triangle_coords(t))
    }

    pub fn region_area(&self, region: Region) -> f64 {
        self.triangles
            .iter()
            .filter(|t| t.region == region)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.signed_area(t)).sum()
    }

    /// Writes the plain-text mesh format (see README, "File formats").
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# pmsm-rom mesh v1");
        let _ = writeln!(
            out,
            "# n_angles {} interface_ring {}",
            self.n_angles, self.interface_ring
        );
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i} {:.17e} {:.17e} {} {} {}",
                p[0],
                p[1],
                self.node_class[i].code(),
                self.angular_index(i),
                self.ring_of(i)
            );
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = t.vertices;
            let _ = writeln!(out, "{i} {a} {b} {c} {}", t.region.tag());
        }
        let mut regions: Vec<Region> = self.triangles.iter().map(|t| t.region).collect();
        regions.sort_by_key(|r| r.tag());
        regions.dedup();
        let _ = writeln!(out, "regions {}", regions.len());
        for r in regions {
            let _ = writeln!(out, "{} {}", r.tag(), r.name());
        }
        out
    }

    pub fn write_text(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Ring layout of a structured polar grid.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub ring_radii: Vec<f64>,
    pub interface_ring: usize,
    pub n_angles: usize,
}

impl PolarGrid {
    /// Builds the triangulation; `region(ring, cell)` tags each cell. The innermost
    /// ring is a natural boundary, the outermost ring is Dirichlet.
    pub fn build(&self, mut region: impl FnMut(usize, usize) -> Region) -> Result<Mesh> {
        let nr = self.ring_radii.len();
        let na = self.n_angles;
        if nr < 2 || na < 3 {
            return Err(Error::InvalidMesh(format!(
                "polar grid needs at least 2 rings and 3 angles, got {nr} and {na}"
            )));
        }
        if self.ring_radii[0] <= 0.0 || self.ring_radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh("ring radii must be positive and increasing".into()));
        }
        if self.interface_ring + 1 >= nr {
            return Err(Error::InvalidMesh(
                "interface ring must lie strictly inside the Dirichlet ring".into(),
            ));
        }
        let dtheta = 2.0 * PI / na as f64;
        let mut nodes = Vec::with_capacity(nr * na);
        let mut node_class = Vec::with_capacity(nr * na);
        for (i, &r) in self.ring_radii.iter().enumerate() {
            let class = if i == nr - 1 {
                NodeClass::Dirichlet
            } else if i == self.interface_ring {
                NodeClass::Interface
            } else if i < self.interface_ring {
                NodeClass::Rotating
            } else {
                NodeClass::Static
            };
            for j in 0..na {
                let th = j as f64 * dtheta;
                nodes.push([r * th.cos(), r * th.sin()]);
                node_class.push(class);
            }
        }
        let id = |i: usize, j: usize| i * na + j % na;
        let mut triangles = Vec::with_capacity(2 * (nr - 1) * na);
        for i in 0..nr - 1 {
            for j in 0..na {
                let reg = region(i, j);
                triangles.push(Triangle {
                    vertices: [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                    region: reg,
                    ring: i,
                    cell: j,
                    half: Half::Lower,
                });
                triangles.push(Triangle {
                    vertices: [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
                    region: reg,
                    ring: i,
                    cell: j,
                    half: Half::Upper,
                });
            }
        }
        Ok(Mesh {
            nodes,
            triangles,
            node_class,
            n_angles: na,
            ring_radii: self.ring_radii.clone(),
            interface_ring: self.interface_ring,
        })
    }
}

/// Ring radii of the machine grid and the band each ring pair belongs to.
pub fn machine_rings(spec: &MachineSpec) -> (Vec<f64>, Vec<Band>, usize) {
    let bounds = spec.radii.as_array();
    let mut radii = vec![bounds[0]];
    let mut bands = Vec::new();
    let mut interface_ring = 0;
    for (b, band) in Band::ALL.iter().enumerate() {
        let n = spec.rings_per_band[b];
        for k in 1..=n {
            let t = k as f64 / n as f64;
            radii.push(bounds[b] + t * (bounds[b + 1] - bounds[b]));
            bands.push(*band);
        }
        if *band == Band::RotorGap {
            interface_ring = radii.len() - 1;
        }
    }
    debug_assert_eq!(bands.len(), radii.len() - 1);
    debug_assert_eq!(bands.len(), spec.rings_per_band.iter().sum::<usize>());
    let _ = N_BANDS;
    (radii, bands, interface_ring)
}

/// Ring index of the nominal tooth face (first ring of the tooth-tip band).
pub fn tooth_face_ring(spec: &MachineSpec) -> usize {
    spec.rings_per_band[..Band::ToothTips.index()].iter().sum()
}

/// Builds the reference (unperturbed) mesh of the surrogate machine.
pub fn build_mesh(spec: &MachineSpec) -> Result<Mesh> {
    spec.validate()?;
    let (radii, bands, interface_ring) = machine_rings(spec);
    let na = spec.n_interface;
    let grid = PolarGrid {
        ring_radii: radii,
        interface_ring,
        n_angles: na,
    };
    let magnets: Vec<_> = (0..spec.n_poles).map(|p| spec.magnet_sector(p)).collect();
    let tips: Vec<_> = (0..spec.n_teeth()).map(|t| spec.tooth_tip_sector(t)).collect();
    let bodies: Vec<_> = (0..spec.n_teeth()).map(|t| spec.tooth_body_sector(t)).collect();
    let slot_cells = spec.slot_cells();
    grid.build(|ring, cell| match bands[ring] {
        Band::RotorCore => Region::RotorIron,
        Band::Magnets => magnets
            .iter()
            .position(|s| s.contains_cell(cell, na))
            .map_or(Region::Air, Region::Magnet),
        Band::RotorGap | Band::StatorGap => Region::Air,
        Band::ToothTips => tips
            .iter()
            .position(|s| s.contains_cell(cell, na))
            .map_or(Region::Air, Region::Tooth),
        Band::Slots => match bodies.iter().position(|s| s.contains_cell(cell, na)) {
            Some(t) => Region::Tooth(t),
            None => {
                // slot s lies between the bodies of teeth s and s+1
                let slot = (cell + na - bodies[0].start) % na / slot_cells;
                let (phase, sign) = spec.slot_phase(slot);
                Region::Coil {
                    slot,
                    phase,
                    positive: sign > 0.0,
                }
            }
        },
        Band::Yoke => Region::StatorYoke,
    })
}

/// Radial motion of tooth-tip nodes: `(tooth, weight)` per node, where a node
/// moves by `-offset_t · weight` along its radial direction. Weight is 1 on the
/// tooth face and decays linearly to 0 at the tooth neck.
pub fn tooth_motion(mesh: &Mesh, spec: &MachineSpec) -> Vec<Option<(usize, f64)>> {
    let face = tooth_face_ring(spec);
    let neck = face + spec.rings_per_band[Band::ToothTips.index()];
    let r_face = spec.radii.tooth_tip;
    let r_neck = spec.radii.tooth_neck;
    let na = mesh.n_angles;
    let sectors: Vec<_> = (0..spec.n_teeth()).map(|t| spec.tooth_tip_sector(t)).collect();
    (0..mesh.n_nodes())
        .map(|node| {
            let ring = mesh.ring_of(node);
            if ring < face || ring >= neck {
                return None;
            }
            let j = mesh.angular_index(node);
            let t = sectors.iter().position(|s| s.contains_node(j, na))?;
            let w = (r_neck - mesh.ring_radii[ring]) / (r_neck - r_face);
            Some((t, w))
        })
        .collect()
}

/// Displaces the tooth-tip nodes according to the machine's tooth lengths. The
/// connectivity and region tags are unchanged.
pub fn apply_tooth_perturbation(mesh: &Mesh, spec: &MachineSpec) -> Result<Mesh> {
    spec.validate()?;
    let motion = tooth_motion(mesh, spec);
    let dtheta = mesh.angle_step();
    let mut out = mesh.clone();
    for (node, m) in motion.iter().enumerate() {
        if let Some((t, w)) = *m {
            let d = spec.tooth_offset(t);
            if d == 0.0 {
                continue;
            }
            let th = mesh.angular_index(node) as f64 * dtheta;
            out.nodes[node][0] -= d * w * th.cos();
            out.nodes[node][1] -= d * w * th.sin();
        }
    }
    for (i, t) in out.triangles.iter().enumerate() {
        let area = out.signed_area(t);
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { triangle: i, area });
        }
    }
    Ok(out)
}

/// Index lists of the free degrees of freedom, in `[static | rotating | interface]` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofPartition {
    pub static_nodes: Vec<usize>,
    pub rotating_nodes: Vec<usize>,
    /// Interface nodes ordered by angular index.
    pub interface_nodes: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
}

impl DofPartition {
    pub fn n_static(&self) -> usize {
        self.static_nodes.len()
    }

    pub fn n_rotating(&self) -> usize {
        self.rotating_nodes.len()
    }

    pub fn n_interface(&self) -> usize {
        self.interface_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.n_static() + self.n_rotating() + self.n_interface()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn static_range(&self) -> std::ops::Range<usize> {
        0..self.n_static()
    }

    pub fn rotating_range(&self) -> std::ops::Range<usize> {
        self.n_static()..self.n_static() + self.n_rotating()
    }

    pub fn interface_range(&self) -> std::ops::Range<usize> {
        self.n_static() + self.n_rotating()..self.len()
    }

    /// Node of each free dof.
    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.static_nodes
            .iter()
            .chain(&self.rotating_nodes)
            .chain(&self.interface_nodes)
            .copied()
    }
}

/// Splits the free nodes into static, rotating and interface lists; Dirichlet
/// nodes are eliminated.
pub fn partition_dofs(mesh: &Mesh) -> Result<DofPartition> {
    let mut static_nodes = Vec::new();
    let mut rotating_nodes = Vec::new();
    let mut interface = Vec::new();
    for (n, c) in mesh.node_class.iter().enumerate() {
        match c {
            NodeClass::Static => static_nodes.push(n),
            NodeClass::Rotating => rotating_nodes.push(n),
            NodeClass::Interface => interface.push(n),
            NodeClass::Dirichlet => {}
        }
    }
    if interface.len() != mesh.n_angles {
        return Err(Error::InvalidMesh(format!(
            "expected {} interface nodes, found {}",
            mesh.n_angles,
            interface.len()
        )));
    }
    interface.sort_by_key(|&n| mesh.angular_index(n));
    let mut dof_of_node = vec![None; mesh.n_nodes()];
    for (d, &n) in static_nodes
        .iter()
        .chain(&rotating_nodes)
        .chain(&interface)
        .enumerate()
    {
        dof_of_node[n] = Some(d);
    }
    Ok(DofPartition {
        static_nodes,
        rotating_nodes,
        interface_nodes: interface,
        dof_of_node,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_mesh() -> Mesh {
        PolarGrid {
            ring_radii: vec![1.0, 2.0, 3.0],
            interface_ring: 1,
            n_angles: 6,
        }
        .build(|_, _| Region::Air)
        .unwrap()
    }

    #[test]
    fn toy_partition_counts() {
        // ring 0 rotates, ring 1 is the interface, ring 2 is Dirichlet
        let mesh = toy_mesh();
        let p = partition_dofs(&mesh).unwrap();
        assert_eq!((p.n_static(), p.n_rotating(), p.n_interface()), (0, 6, 6));
        assert_eq!(p.len(), 12);
        for n in 12..18 {
            assert_eq!(p.dof(n), None);
        }
        let four = PolarGrid {
            ring_radii: vec![1.0, 2.0, 3.0, 4.0],
            interface_ring: 1,
            n_angles: 6,
        }
        .build(|_, _| Region::Air)
        .unwrap();
        let p = partition_dofs(&four).unwrap();
        assert_eq!((p.n_static(), p.n_rotating(), p.n_interface()), (6, 6, 6));
    }

    #[test]
    fn interface_sorted_by_angle() {
        let mesh = build_mesh(&MachineSpec::coarse()).unwrap();
        let p = partition_dofs(&mesh).unwrap();
        for (k, &n) in p.interface_nodes.iter().enumerate() {
            assert_eq!(mesh.angular_index(n), k);
        }
    }

    #[test]
    fn all_triangles_positively_oriented() {
        let mesh = toy_mesh();
        assert!(mesh.triangles.iter().all(|t| mesh.signed_area(t) > 0.0));
        let mesh = build_mesh(&MachineSpec::coarse()).unwrap();
        assert!(mesh.triangles.iter().all(|t| mesh.signed_area(t) > 0.0));
    }

    #[test]
    fn default_mesh_layout() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec).unwrap();
        let p = partition_dofs(&mesh).unwrap();
        assert_eq!(p.n_interface(), 720);
        assert_eq!(mesh.n_rings(), 16);
        assert_eq!(mesh.ring_radii[mesh.interface_ring], spec.radii.interface);
        assert_eq!(mesh.ring_radii[tooth_face_ring(&spec)], spec.radii.tooth_tip);
        // Dirichlet nodes are exactly the outer ring
        let outer = mesh.n_rings() - 1;
        for n in 0..mesh.n_nodes() {
            assert_eq!(
                mesh.node_class[n] == NodeClass::Dirichlet,
                mesh.ring_of(n) == outer
            );
        }
    }

    #[test]
    fn six_fold_tag_symmetry() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec).unwrap();
        let shift = spec.n_interface / spec.n_poles;
        let na = mesh.n_angles;
        for (i, t) in mesh.triangles.iter().enumerate() {
            // triangles are stored cell-major: index = 2 * (ring * na + cell) + half
            let j = 2 * (t.ring * na + (t.cell + shift) % na) + (i % 2);
            let other = &mesh.triangles[j];
            assert_eq!(other.half, t.half);
            assert_eq!(other.region, t.region.shifted_by_poles(1, &spec), "cell {}", t.cell);
        }
    }

    #[test]
    fn magnets_stay_in_magnet_band() {
        let spec = MachineSpec::default();
        let mesh = build_mesh(&spec).unwrap();
        for t in &mesh.triangles {
            if let Region::Magnet(_) = t.region {
                for v in t.vertices {
                    let r = mesh.ring_radii[mesh.ring_of(v)];
                    assert!(r >= spec.radii.magnet_inner - 1e-15 && r <= spec.radii.magnet_outer + 1e-15);
                }
            }
        }
        let n_coils = mesh
            .triangles
            .iter()
            .filter(|t| matches!(t.region, Region::Coil { .. }))
            .count();
        assert!(n_coils > 0);
    }

    #[test]
    fn rotor_rotation_reproduces_coordinates() {
        let mesh = build_mesh(&MachineSpec::coarse()).unwrap();
        let dth = mesh.angle_step();
        for k in [1usize, 7, 50] {
            let (s, c) = (k as f64 * dth).sin_cos();
            for ring in 0..=mesh.interface_ring {
                for j in 0..mesh.n_angles {
                    let p = mesh.nodes[mesh.node(ring, j)];
                    let q = mesh.nodes[mesh.node(ring, j + k)];
                    let rp = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
                    assert!((rp[0] - q[0]).abs() < 1e-12 && (rp[1] - q[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn deterministic_construction() {
        let a = build_mesh(&MachineSpec::coarse()).unwrap();
        let b = build_mesh(&MachineSpec::coarse()).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn nominal_tooth_lengths_leave_mesh_unchanged() {
        let mut spec = MachineSpec::coarse();
        let mesh = build_mesh(&spec).unwrap();
        spec.tooth_lengths = vec![spec.nominal_tooth_length(); spec.n_teeth()];
        let out = apply_tooth_perturbation(&mesh, &spec).unwrap();
        assert_eq!(out, mesh);
    }

    #[test]
    fn tooth_perturbation_moves_only_its_tooth() {
        let mut spec = MachineSpec::default();
        let mesh = build_mesh(&spec).unwrap();
        spec.perturb_tooth(4, 0.3e-3);
        let out = apply_tooth_perturbation(&mesh, &spec).unwrap();
        let face = tooth_face_ring(&spec);
        let neck = face + spec.rings_per_band[Band::ToothTips.index()];
        let sector = spec.tooth_tip_sector(4);
        let mut moved = 0;
        for n in 0..mesh.n_nodes() {
            let d = ((out.nodes[n][0] - mesh.nodes[n][0]).powi(2)
                + (out.nodes[n][1] - mesh.nodes[n][1]).powi(2))
            .sqrt();
            if d > 0.0 {
                moved += 1;
                let ring = mesh.ring_of(n);
                assert!(ring >= face && ring < neck);
                assert!(sector.contains_node(mesh.angular_index(n), mesh.n_angles));
            }
            if mesh.ring_of(n) == face && sector.contains_node(mesh.angular_index(n), mesh.n_angles) {
                assert!((d - 0.3e-3).abs() < 1e-15);
            }
        }
        assert_eq!(moved, (sector.len + 1) * (neck - face));
    }

    #[test]
    fn tooth_perturbation_area_matches_annulus_sector_formula() {
        let mut spec = MachineSpec::default();
        let mesh = build_mesh(&spec).unwrap();
        let delta = 0.3e-3;
        spec.perturb_tooth(4, delta);
        let out = apply_tooth_perturbation(&mesh, &spec).unwrap();
        assert!(out.triangles.iter().all(|t| out.signed_area(t) > 0.0));
        // polygonal annulus sector between radii r1 < r2 over n cells of width h:
        // n/2 sin(h) (r2² - r1²)
        let h = mesh.angle_step();
        let n = spec.tooth_tip_sector(4).len as f64;
        let r = spec.radii.tooth_tip;
        let expected = 0.5 * n * h.sin() * (r * r - (r - delta) * (r - delta));
        let got = out.region_area(Region::Tooth(4)) - mesh.region_area(Region::Tooth(4));
        assert!(
            ((got - expected) / expected).abs() < 1e-12,
            "{got:e} vs {expected:e}"
        );
        let total = (out.total_area() - mesh.total_area()) / mesh.total_area();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn inverted_triangle_is_rejected() {
        let spec = MachineSpec::coarse();
        let mesh = build_mesh(&spec).unwrap();
        // a spec with a wider airgap admits an offset that folds the mesh built above
        let mut wide = spec.clone();
        wide.radii.magnet_outer = 32.0e-3;
        wide.radii.interface = 33.0e-3;
        wide.perturb_tooth(0, 1.2e-3);
        wide.validate().unwrap();
        assert!(matches!(
            apply_tooth_perturbation(&mesh, &wide),
            Err(Error::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn text_export_has_three_tables() {
        let mesh = build_mesh(&MachineSpec::coarse()).unwrap();
        let text = mesh.to_text();
        assert!(text.contains(&format!("nodes {}", mesh.n_nodes())));
        assert!(text.contains(&format!("triangles {}", mesh.triangles.len())));
        assert!(text.contains("regions "));
        assert!(text.contains("coil_0_phase_a+"));
    }
}
