//! Snapshot matrices indexed by rotor step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::BlockDims;

/// Row block of a snapshot or dof vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Block {
    Stator,
    Rotor,
    Interface,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Stator, Block::Rotor, Block::Interface];

    pub fn name(self) -> &'static str {
        match self {
            Block::Stator => "stator",
            Block::Rotor => "rotor",
            Block::Interface => "interface",
        }
    }

    pub fn rows(self, dims: &BlockDims) -> std::ops::Range<usize> {
        match self {
            Block::Stator => dims.stator(),
            Block::Rotor => dims.rotor(),
            Block::Interface => dims.interface(),
        }
    }
}

/// Full-order solutions, one column per rotor step.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub steps: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub dims: BlockDims,
}

impl SnapshotSet {
    pub fn empty(dims: BlockDims) -> Self {
        Self {
            steps: Vec::new(),
            matrix: DMatrix::zeros(dims.total(), 0),
            dims,
        }
    }

    pub fn new(steps: Vec<usize>, columns: &[DVector<f64>], dims: BlockDims) -> Result<Self> {
        let mut set = Self::empty(dims);
        set.extend(&steps, columns)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Appends columns; a step already present is rejected.
    pub fn extend(&mut self, steps: &[usize], columns: &[DVector<f64>]) -> Result<()> {
        if steps.len() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} steps for {} columns",
                steps.len(),
                columns.len()
            )));
        }
        let mut seen: std::collections::HashSet<usize> = self.steps.iter().copied().collect();
        for &k in steps {
            if !seen.insert(k) {
                return Err(Error::DuplicateAngle(k));
            }
        }
        let n = self.dims.total();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "snapshot of length {} for {n} dofs",
                c.len()
            )));
        }
        let old = self.matrix.ncols();
        let mut m = std::mem::replace(&mut self.matrix, DMatrix::zeros(0, 0))
            .resize_horizontally(old + columns.len(), 0.0);
        for (c, col) in columns.iter().enumerate() {
            m.set_column(old + c, col);
        }
        self.matrix = m;
        self.steps.extend_from_slice(steps);
        Ok(())
    }

    pub fn append(&mut self, other: &SnapshotSet) -> Result<()> {
        let cols: Vec<_> = other.matrix.column_iter().map(|c| c.into_owned()).collect();
        self.extend(&other.steps, &cols)
    }

    /// Rows of one block.
    pub fn block(&self, b: Block) -> DMatrix<f64> {
        let r = b.rows(&self.dims);
        self.matrix.rows_range(r).into_owned()
    }

    pub fn column_of(&self, step: usize) -> Option<DVector<f64>> {
        self.steps
            .iter()
            .position(|&k| k == step)
            .map(|c| self.matrix.column(c).into_owned())
    }
}
