//! Surrogate permanent-magnet synchronous machine.
//!
//! The cross-section is a stack of concentric radial bands:
//!
//! ```text
//!   shaft ── rotor core ── magnet band ── rotor gap ─┤Γ_I├─ stator gap ── tooth tips ── slots ── yoke ── outer
//! ```
//!
//! The magnet band holds one sector magnet per pole (air between magnets). The
//! tooth-tip band holds iron tooth tips separated by slot openings; the slot band
//! holds tooth bodies and coil-filled slots. Every band uses the same angular
//! resolution so that a rotor step of one interface cell is an exact index shift.
//!
//! All quantities are SI. Angles are mechanical radians unless stated otherwise.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * PI;

/// Default slot current density amplitude (A/m²). Chosen so that on the default
/// mesh the coil load vector and the magnet load vector have norms of the same
/// order of magnitude.
pub const DEFAULT_CURRENT_DENSITY: f64 = 5.0e6;

/// Number of radial bands of the surrogate geometry.
pub const N_BANDS: usize = 7;

/// Radial bands, innermost first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    RotorCore,
    Magnets,
    RotorGap,
    StatorGap,
    ToothTips,
    Slots,
    Yoke,
}

impl Band {
    pub const ALL: [Band; N_BANDS] = [
        Band::RotorCore,
        Band::Magnets,
        Band::RotorGap,
        Band::StatorGap,
        Band::ToothTips,
        Band::Slots,
        Band::Yoke,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_rotor(self) -> bool {
        matches!(self, Band::RotorCore | Band::Magnets | Band::RotorGap)
    }
}

/// Band boundary radii in meters, strictly increasing from the shaft outwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Radii {
    /// Inner boundary of the rotor core (natural boundary condition).
    pub shaft: f64,
    pub magnet_inner: f64,
    pub magnet_outer: f64,
    /// Radius of the sliding interface Γ_I.
    pub interface: f64,
    /// Nominal tooth face radius.
    pub tooth_tip: f64,
    /// Outer radius of the tooth-tip band; tooth perturbations vanish here.
    pub tooth_neck: f64,
    pub slot_bottom: f64,
    /// Outer boundary carrying the homogeneous Dirichlet condition.
    pub outer: f64,
}

impl Radii {
    pub fn as_array(&self) -> [f64; N_BANDS + 1] {
        [
            self.shaft,
            self.magnet_inner,
            self.magnet_outer,
            self.interface,
            self.tooth_tip,
            self.tooth_neck,
            self.slot_bottom,
            self.outer,
        ]
    }
}

impl Default for Radii {
    fn default() -> Self {
        Self {
            shaft: 15.0e-3,
            magnet_inner: 31.5e-3,
            magnet_outer: 34.0e-3,
            interface: 34.5e-3,
            tooth_tip: 35.5e-3,
            tooth_neck: 37.0e-3,
            slot_bottom: 48.0e-3,
            outer: 55.0e-3,
        }
    }
}

/// Geometry, material and excitation data of the surrogate machine.
///
/// Loaded from TOML; every field has a default, so a config file only needs the
/// values it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineSpec {
    pub n_poles: usize,
    pub slots_per_pole: usize,
    /// Number of equidistant nodes on the interface circle; also the angular
    /// resolution of the whole mesh and the number of rotor positions per revolution.
    pub n_interface: usize,
    pub radii: Radii,
    /// Number of element layers in each radial band, innermost first.
    pub rings_per_band: Vec<usize>,
    /// Axial length ℓ_z (metadata; the 2D problem is per unit depth).
    pub depth: f64,
    pub rel_permeability_iron: f64,
    pub rel_permeability_magnet: f64,
    /// Remanence magnitude |B_rem| in tesla.
    pub remanence: f64,
    /// Slot current density amplitude in A/m².
    pub current_density: f64,
    /// Electrical phase offset γ of the three-phase currents.
    pub phase_offset: f64,
    /// Electrical frequency (metadata only).
    pub frequency: f64,
    /// Magnet arc as a fraction of the pole pitch.
    pub magnet_arc: f64,
    /// Slot opening in the tooth-tip band as a fraction of the slot pitch.
    pub slot_opening: f64,
    /// Slot width in the slot band as a fraction of the slot pitch.
    pub slot_width: f64,
    /// Per-magnet deviation φ_p of the remanence direction (radians). Empty means all zero.
    pub magnet_angles: Vec<f64>,
    /// Per-tooth radial length ℓ_t in meters, measured from the slot bottom to the
    /// tooth face. Empty means all nominal.
    pub tooth_lengths: Vec<f64>,
}

impl Default for MachineSpec {
    fn default() -> Self {
        Self {
            n_poles: 6,
            slots_per_pole: 6,
            n_interface: 720,
            radii: Radii::default(),
            rings_per_band: vec![3, 2, 1, 1, 2, 4, 2],
            depth: 10.0e-3,
            rel_permeability_iron: 500.0,
            rel_permeability_magnet: 1.0,
            remanence: 1.0,
            current_density: DEFAULT_CURRENT_DENSITY,
            phase_offset: 0.0,
            frequency: 50.0,
            magnet_arc: 0.8,
            slot_opening: 0.2,
            slot_width: 0.5,
            magnet_angles: Vec::new(),
            tooth_lengths: Vec::new(),
        }
    }
}

/// Angular cell range `[start, start + len)` (indices taken modulo the cell count).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sector {
    pub start: usize,
    pub len: usize,
}

impl Sector {
    /// Whether angular cell `cell` lies in the sector, for a grid of `n` cells.
    pub fn contains_cell(&self, cell: usize, n: usize) -> bool {
        (cell + n - self.start % n) % n < self.len
    }

    /// Whether node `j` is one of the `len + 1` nodes bounding the sector's cells.
    pub fn contains_node(&self, j: usize, n: usize) -> bool {
        (j + n - self.start % n) % n <= self.len
    }
}

impl MachineSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: MachineSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("MachineSpec is always serializable")
    }

    /// A coarse variant of the default machine, small enough for dense oracles.
    pub fn coarse() -> Self {
        Self {
            n_interface: 144,
            rings_per_band: vec![1; N_BANDS],
            // four cells per slot pitch: two for the opening, two for the tooth tip
            slot_opening: 0.5,
            ..Self::default()
        }
    }

    pub fn n_teeth(&self) -> usize {
        self.n_poles * self.slots_per_pole
    }

    pub fn pole_pairs(&self) -> usize {
        self.n_poles / 2
    }

    /// Rotor step Δϑ = 2π / N_I.
    pub fn angle_step(&self) -> f64 {
        2.0 * PI / self.n_interface as f64
    }

    /// Angular cells per pole.
    pub fn pole_cells(&self) -> usize {
        self.n_interface / self.n_poles
    }

    /// Angular cells per slot pitch.
    pub fn slot_cells(&self) -> usize {
        self.n_interface / self.n_teeth()
    }

    fn centered(&self, pitch: usize, width: usize, index: usize) -> Sector {
        Sector {
            start: index * pitch + (pitch - width) / 2,
            len: width,
        }
    }

    fn magnet_width_cells(&self) -> usize {
        ((self.magnet_arc * self.pole_cells() as f64).round() as usize).clamp(1, self.pole_cells())
    }

    fn opening_cells(&self) -> usize {
        (self.slot_opening * self.slot_cells() as f64).round() as usize
    }

    fn slot_width_cells(&self) -> usize {
        ((self.slot_width * self.slot_cells() as f64).round() as usize).clamp(1, self.slot_cells() - 1)
    }

    /// Cells covered by magnet `p`, centered on the pole axis at angle `p · 2π/N_p`.
    pub fn magnet_sector(&self, p: usize) -> Sector {
        let pitch = self.pole_cells();
        let w = self.magnet_width_cells();
        let s = self.centered(pitch, w, p);
        // centre on the pole axis instead of the pole cell block
        Sector {
            start: (s.start + self.n_interface - pitch / 2) % self.n_interface,
            len: w,
        }
    }

    /// Cells covered by the tip of tooth `t` (tooth-tip band).
    pub fn tooth_tip_sector(&self, t: usize) -> Sector {
        let pitch = self.slot_cells();
        self.centered(pitch, pitch - self.opening_cells(), t)
    }

    /// Cells covered by the body of tooth `t` (slot band).
    pub fn tooth_body_sector(&self, t: usize) -> Sector {
        let pitch = self.slot_cells();
        self.centered(pitch, pitch - self.slot_width_cells(), t)
    }

    /// Phase index and polarity of the coil in slot `s` (the slot following tooth `s`).
    ///
    /// Integral-slot winding with 60° phase belts: `+A, -C, +B, -A, +C, -B` repeating
    /// every pole pair, `slots_per_pole / 3` slots per belt.
    pub fn slot_phase(&self, s: usize) -> (usize, f64) {
        const BELTS: [(usize, f64); 6] = [(0, 1.0), (2, -1.0), (1, 1.0), (0, -1.0), (2, 1.0), (1, -1.0)];
        let per_belt = self.slots_per_pole / 3;
        BELTS[(s / per_belt) % 6]
    }

    /// Nominal direction of the remanence of magnet `p`: radial on its pole axis,
    /// alternating outward/inward.
    pub fn magnet_axis(&self, p: usize) -> [f64; 2] {
        let theta = 2.0 * PI * p as f64 / self.n_poles as f64;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        [sign * theta.cos(), sign * theta.sin()]
    }

    /// Reluctivity ν = 1/(μ0 μ_r) for iron, magnets and air.
    pub fn nu_iron(&self) -> f64 {
        1.0 / (MU0 * self.rel_permeability_iron)
    }

    pub fn nu_magnet(&self) -> f64 {
        1.0 / (MU0 * self.rel_permeability_magnet)
    }

    pub fn nu_air(&self) -> f64 {
        1.0 / MU0
    }

    pub fn nominal_tooth_length(&self) -> f64 {
        self.radii.slot_bottom - self.radii.tooth_tip
    }

    /// ℓ_t − ℓ_nominal; positive values move the tooth face towards the airgap.
    pub fn tooth_offset(&self, t: usize) -> f64 {
        self.tooth_lengths
            .get(t)
            .map_or(0.0, |l| l - self.nominal_tooth_length())
    }

    pub fn magnet_angle(&self, p: usize) -> f64 {
        self.magnet_angles.get(p).copied().unwrap_or(0.0)
    }

    /// Admissible open interval for tooth offsets: the face must stay outside the
    /// interface circle and the tip band must not fold over.
    pub fn tooth_offset_bounds(&self) -> (f64, f64) {
        let r = &self.radii;
        (-(r.tooth_neck - r.tooth_tip), r.tooth_tip - r.interface)
    }

    /// Perturbation parameters held by this spec.
    pub fn parameters(&self) -> crate::fem::Parameters {
        crate::fem::Parameters {
            tooth_offsets: (0..self.n_teeth()).map(|t| self.tooth_offset(t)).collect(),
            magnet_angles: (0..self.n_poles).map(|p| self.magnet_angle(p)).collect(),
        }
    }

    /// Sets tooth `t` to `nominal + offset`, materializing the tooth length list.
    pub fn perturb_tooth(&mut self, t: usize, offset: f64) {
        if self.tooth_lengths.is_empty() {
            self.tooth_lengths = vec![self.nominal_tooth_length(); self.n_teeth()];
        }
        self.tooth_lengths[t] = self.nominal_tooth_length() + offset;
    }

    pub fn perturb_magnet(&mut self, p: usize, angle: f64) {
        if self.magnet_angles.is_empty() {
            self.magnet_angles = vec![0.0; self.n_poles];
        }
        self.magnet_angles[p] = angle;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n_teeth()).all(|t| self.tooth_offset(t) == 0.0)
            && (0..self.n_poles).all(|p| self.magnet_angle(p) == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_poles < 2 || self.n_poles % 2 != 0 {
            return bad(format!("n_poles must be even and >= 2, got {}", self.n_poles));
        }
        if self.slots_per_pole < 3 || self.slots_per_pole % 3 != 0 {
            return bad(format!(
                "slots_per_pole must be a positive multiple of 3, got {}",
                self.slots_per_pole
            ));
        }
        if self.n_interface == 0 || self.n_interface % self.n_poles != 0 {
            let q = self.n_poles * self.slots_per_pole * 2;
            let lower = (self.n_interface / q).max(1) * q;
            return bad(format!(
                "n_interface = {} is not divisible by n_poles = {}; nearest admissible value is {}",
                self.n_interface, self.n_poles, lower
            ));
        }
        if self.n_interface % self.n_teeth() != 0 || self.slot_cells() < 2 {
            let q = self.n_teeth() * 2;
            let lower = (self.n_interface / q).max(1) * q;
            return bad(format!(
                "n_interface = {} must be a multiple of the tooth count {} with at least two cells per slot pitch; try {}",
                self.n_interface,
                self.n_teeth(),
                lower
            ));
        }
        let radii = self.radii.as_array();
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("radii must be positive and strictly increasing: {radii:?}"));
        }
        if self.rings_per_band.len() != N_BANDS || self.rings_per_band.contains(&0) {
            return bad(format!(
                "rings_per_band needs {N_BANDS} positive entries, got {:?}",
                self.rings_per_band
            ));
        }
        for (name, v) in [
            ("rel_permeability_iron", self.rel_permeability_iron),
            ("rel_permeability_magnet", self.rel_permeability_magnet),
            ("depth", self.depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.remanence.is_finite() || !self.current_density.is_finite() {
            return bad("excitation amplitudes must be finite".into());
        }
        for (name, v) in [
            ("magnet_arc", self.magnet_arc),
            ("slot_opening", self.slot_opening),
            ("slot_width", self.slot_width),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        let opening = self.opening_cells();
        if opening < 2 || opening >= self.slot_cells() {
            return bad(format!(
                "slot opening spans {opening} cells; it needs at least 2 and fewer than the slot pitch {}",
                self.slot_cells()
            ));
        }
        if !self.magnet_angles.is_empty() && self.magnet_angles.len() != self.n_poles {
            return bad(format!(
                "magnet_angles has {} entries, expected {} or none",
                self.magnet_angles.len(),
                self.n_poles
            ));
        }
        if !self.tooth_lengths.is_empty() && self.tooth_lengths.len() != self.n_teeth() {
            return bad(format!(
                "tooth_lengths has {} entries, expected {} or none",
                self.tooth_lengths.len(),
                self.n_teeth()
            ));
        }
        let (lo, hi) = self.tooth_offset_bounds();
        for t in 0..self.n_teeth() {
            let d = self.tooth_offset(t);
            if !(d > lo && d < hi) {
                return bad(format!(
                    "tooth {t} length {} m leaves the admissible range ({}, {}) m",
                    self.tooth_lengths[t],
                    self.nominal_tooth_length() + lo,
                    self.nominal_tooth_length() + hi
                ));
            }
        }
        Ok(())
    }
}

/// Synchronous three-phase excitation I_q(ϑ) = I₀ cos(p ϑ − 2πq/3 + γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePhase {
    pub amplitude: f64,
    pub pole_pairs: usize,
    pub offset: f64,
}

impl ThreePhase {
    pub fn from_spec(spec: &MachineSpec) -> Self {
        Self {
            amplitude: spec.current_density,
            pole_pairs: spec.pole_pairs(),
            offset: spec.phase_offset,
        }
    }

    /// Current density of phase `q` at rotor angle `theta`.
    pub fn current(&self, q: usize, theta: f64) -> f64 {
        let electrical = self.pole_pairs as f64 * theta - 2.0 * PI * q as f64 / 3.0 + self.offset;
        self.amplitude * electrical.cos()
    }

    pub fn currents(&self, theta: f64) -> [f64; 3] {
        [0, 1, 2].map(|q| self.current(q, theta))
    }
}
