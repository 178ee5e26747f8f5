//! Snapshot sets, POD bases and the projected reduced model.

pub mod basis;
pub mod rom;
pub mod snapshots;

pub use basis::{
    largest_principal_angle, pod_snapshot_method, pod_snapshot_truncated, pod_svd, truncate_energy, truncation_size,
    BasisSummary,
    PodBasis,
};
pub use rom::{solve_rom, ReducedModel, RomSolution};
pub use snapshots::{Block, SnapshotSet};
