use alloc::vec::Vec;

use crate::data::{DataKind, DataModel, XLaw};
use crate::error::{config, Error, Result};
use crate::rng::{Purpose, RandomnessContract};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadMode {
    /// i.i.d. draws of `x` from the data law.
    MonteCarlo,
    /// Midpoint tensor grid on the input cube (uniform-cube inputs only); a
    /// finite dataset uses every stored point.
    FixedGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Refresh {
    /// A new node set for every Euler step.
    PerStep,
    /// One node set for the whole solve.
    Frozen,
}

/// How integrals against `pi(dx, dy)` are approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadratureSpec {
    pub mode: QuadMode,
    pub nodes: usize,
    pub refresh: Refresh,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { mode: QuadMode::MonteCarlo, nodes: 4096, refresh: Refresh::Frozen }
    }
}

impl QuadratureSpec {
    pub fn frozen(nodes: usize) -> Self {
        Self { mode: QuadMode::MonteCarlo, nodes, refresh: Refresh::Frozen }
    }

    pub fn validate(&self, model: &DataModel) -> Result<()> {
        if self.nodes == 0 {
            return Err(config("quadrature needs at least one node"));
        }
        if self.mode == QuadMode::FixedGrid {
            match (&model.kind, model.x_law) {
                (DataKind::Dataset(_), _) | (_, XLaw::UniformCube { .. }) => {}
                _ => return Err(config("fixed-grid quadrature needs uniform-cube inputs or a dataset")),
            }
        }
        Ok(())
    }

    /// Node set for Euler step `step` (ignored when frozen). Synthetic
    /// models label nodes with `E[y | x]`: the drift is linear in `y`, so
    /// the noise integrates out exactly.
    pub fn nodes_for(&self, model: &DataModel, contract: RandomnessContract, step: u64) -> Result<Nodes> {
        self.validate(model)?;
        let index = match self.refresh {
            Refresh::Frozen => 0,
            Refresh::PerStep => step,
        };
        match (self.mode, &model.kind) {
            (QuadMode::FixedGrid, DataKind::Dataset(ds)) => {
                let x: Vec<f64> = (0..ds.len()).flat_map(|i| ds.x_of(i).iter().copied()).collect();
                Nodes::from_rows(ds.dim(), &x, ds.labels().to_vec())
            }
            (QuadMode::FixedGrid, _) => {
                let half = match model.x_law {
                    XLaw::UniformCube { half_width } => half_width,
                    XLaw::TruncatedGaussian { .. } => unreachable!("validated above"),
                };
                grid_nodes(model, half, self.nodes)
            }
            (QuadMode::MonteCarlo, kind) => {
                let mut rng = contract.rng_indexed(Purpose::Quadrature, index);
                let d = model.dim;
                let mut x = alloc::vec![0.0; self.nodes * d];
                let mut y = Vec::with_capacity(self.nodes);
                let clean = DataModel { noise_scale: 0.0, ..model.clone() };
                for k in 0..self.nodes {
                    let row = &mut x[k * d..(k + 1) * d];
                    let label = clean.sample_into(&mut rng, row);
                    y.push(match kind {
                        DataKind::Dataset(_) => label,
                        _ => model.conditional_mean(row),
                    });
                }
                Nodes::from_rows(d, &x, y)
            }
        }
    }
}

// Midpoint grid with floor(nodes^(1/d)) points per axis.
fn grid_nodes(model: &DataModel, half: f64, nodes: usize) -> Result<Nodes> {
    let d = model.dim;
    let mut per_axis = 1usize;
    while (per_axis + 1).checked_pow(d as u32).is_some_and(|t| t <= nodes) {
        per_axis += 1;
    }
    let total = per_axis.pow(d as u32);
    let mut x = Vec::with_capacity(total * d);
    let mut y = Vec::with_capacity(total);
    let mut idx = alloc::vec![0usize; d];
    for _ in 0..total {
        let row: Vec<f64> = idx.iter().map(|&i| -half + (2 * i + 1) as f64 * half / per_axis as f64).collect();
        y.push(model.conditional_mean(&row));
        x.extend_from_slice(&row);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < per_axis {
                break;
            }
            *slot = 0;
        }
    }
    Nodes::from_rows(d, &x, y)
}

/// Uniformly weighted quadrature nodes `(x_k, y_k)`, inputs stored one
/// coordinate at a time so kernels stream over nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Nodes {
    dim: usize,
    columns: Vec<f64>,
    y: Vec<f64>,
}

impl Nodes {
    /// From row-major inputs (`len x dim`) and labels.
    pub fn from_rows(dim: usize, x: &[f64], y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("quadrature nodes"));
        }
        if dim == 0 || x.len() != y.len() * dim {
            return Err(Error::DimensionMismatch { expected: y.len() * dim, found: x.len() });
        }
        let k = y.len();
        let mut columns = alloc::vec![0.0; k * dim];
        for i in 0..k {
            for j in 0..dim {
                columns[j * k + i] = x[i * dim + j];
            }
        }
        Ok(Self { dim, columns, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinate `j` of every node.
    pub fn column(&self, j: usize) -> &[f64] {
        let k = self.len();
        &self.columns[j * k..(j + 1) * k]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_of(&self, i: usize) -> Vec<f64> {
        (0..self.dim).map(|j| self.columns[j * self.len() + i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn frozen_nodes_repeat_and_per_step_nodes_change() {
        let model = DataModel::default_teacher();
        let c = RandomnessContract::new(3, 0);
        let frozen = QuadratureSpec::frozen(64);
        assert_eq!(frozen.nodes_for(&model, c, 0).unwrap(), frozen.nodes_for(&model, c, 17).unwrap());
        let fresh = QuadratureSpec { refresh: Refresh::PerStep, ..frozen };
        assert_ne!(fresh.nodes_for(&model, c, 0).unwrap(), fresh.nodes_for(&model, c, 1).unwrap());
    }

    #[test]
    fn monte_carlo_nodes_carry_conditional_means() {
        let model = DataModel::default_teacher();
        let nodes = QuadratureSpec::frozen(50).nodes_for(&model, RandomnessContract::new(1, 0), 0).unwrap();
        for k in 0..nodes.len() {
            assert_eq!(nodes.y()[k], model.conditional_mean(&nodes.x_of(k)));
        }
    }

    #[test]
    fn grid_is_a_midpoint_tensor_grid() {
        let model = DataModel::default_teacher();
        let spec = QuadratureSpec { mode: QuadMode::FixedGrid, nodes: 20, refresh: Refresh::Frozen };
        let nodes = spec.nodes_for(&model, RandomnessContract::new(1, 0), 0).unwrap();
        assert_eq!(nodes.len(), 16);
        let xs: Vec<f64> = nodes.column(0)[..4].to_vec();
        assert_eq!(xs, alloc::vec![-0.75, -0.25, 0.25, 0.75]);
        let mean: f64 = nodes.column(1).iter().sum::<f64>() / 16.0;
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn dataset_grid_uses_every_point() {
        let ds = Dataset::new(1, alloc::vec![0.5, -0.5, 1.0], alloc::vec![1.0, -1.0, 1.0]).unwrap();
        let model = DataModel::from_dataset(ds);
        let spec = QuadratureSpec { mode: QuadMode::FixedGrid, nodes: 1, refresh: Refresh::Frozen };
        let nodes = spec.nodes_for(&model, RandomnessContract::new(1, 0), 0).unwrap();
        assert_eq!(nodes.column(0), &[0.5, -0.5, 1.0]);
        assert_eq!(nodes.y(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn grid_rejects_gaussian_inputs() {
        let model = DataModel { x_law: XLaw::TruncatedGaussian { scale: 1.0, cutoff: 3.0 }, ..DataModel::default_teacher() };
        let spec = QuadratureSpec { mode: QuadMode::FixedGrid, nodes: 16, refresh: Refresh::Frozen };
        assert!(spec.validate(&model).is_err());
    }
}
