//! Finite element model: assembly, affine decomposition and the rotating block system.

pub mod assembly;
pub mod decomposition;
pub mod element;
pub mod system;

pub use assembly::{assemble_loads, assemble_node_stiffness, assemble_stiffness, LoadVectors, SideMatrices};
pub use decomposition::{ParametricDecomposition, Parameters, ToothGroup};
pub use system::{
    solve_full, sweep_full, BlockDims, BlockSystem, FullSolution, RotatedBlocks, RotatedSystem,
    SweepTiming,
};

use crate::error::Result;
use crate::machine::{MachineSpec, ThreePhase};
use crate::mesh::{apply_tooth_perturbation, build_mesh, partition_dofs, DofPartition, Mesh};

/// Reference mesh, dof partition and affine decomposition of one machine.
#[derive(Debug, Clone)]
pub struct FemModel {
    pub spec: MachineSpec,
    /// Unperturbed mesh.
    pub mesh: Mesh,
    pub partition: DofPartition,
    pub decomposition: ParametricDecomposition,
}

impl FemModel {
    pub fn new(spec: &MachineSpec) -> Result<Self> {
        let mesh = build_mesh(spec)?;
        let partition = partition_dofs(&mesh)?;
        let decomposition = ParametricDecomposition::build(&mesh, &partition, spec)?;
        Ok(Self {
            spec: spec.clone(),
            mesh,
            partition,
            decomposition,
        })
    }

    /// Block system at the machine's own perturbation parameters.
    pub fn system(&self) -> Result<BlockSystem> {
        self.system_at(&self.spec.parameters())
    }

    pub fn system_at(&self, params: &Parameters) -> Result<BlockSystem> {
        let sides = self.decomposition.evaluate_stiffness(params)?;
        let loads = self.decomposition.evaluate_loads(params)?;
        BlockSystem::new(&self.partition, sides, loads, ThreePhase::from_spec(&self.spec))
    }

    /// The displaced ("actual") mesh for the machine's tooth lengths.
    pub fn perturbed_mesh(&self) -> Result<Mesh> {
        apply_tooth_perturbation(&self.mesh, &self.spec)
    }
}
