//! Time grids on `[0, T]` and grid-sampled vector functions.
//!
//! Every operator in this crate works on a shared grid: operators never
//! resample, and mixing functions from different grids is an error.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Strictly increasing time nodes with `t_0 = 0` and `t_n = T`.
///
/// An optional geometric refinement adds nodes inside the final uniform
/// cell, which is where the coupling drift becomes singular.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    nodes: Arc<[f64]>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes[..] == other.nodes[..]
    }
}

impl TimeGrid {
    /// Builds a grid from explicit nodes, validating the invariants.
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first node must be exactly 0, got {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "nodes must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !nodes.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node".into()));
        }
        Ok(Self { nodes: nodes.into() })
    }

    /// Uniform grid with `n_cells` cells on `[0, t_final]`.
    pub fn uniform(t_final: f64, n_cells: usize) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidGrid(format!("t_final must be > 0, got {t_final}")));
        }
        if n_cells < 3 {
            return Err(Error::InvalidGrid("need at least 3 cells".into()));
        }
        let mut nodes: Vec<f64> = (0..=n_cells)
            .map(|k| t_final * (k as f64) / (n_cells as f64))
            .collect();
        nodes[0] = 0.0;
        *nodes.last_mut().unwrap() = t_final;
        Self::new(nodes)
    }

    /// Uniform grid whose last cell is split geometrically `levels` times:
    /// nodes `T - dt/2, T - dt/4, ...` are inserted before `T`.
    pub fn uniform_refined(t_final: f64, n_cells: usize, levels: usize) -> Result<Self> {
        let base = Self::uniform(t_final, n_cells)?;
        if levels == 0 {
            return Ok(base);
        }
        let n = base.nodes.len();
        let dt = base.nodes[n - 1] - base.nodes[n - 2];
        let mut nodes: Vec<f64> = base.nodes[..n - 1].to_vec();
        for j in 1..=levels {
            nodes.push(t_final - dt / (2f64).powi(j as i32));
        }
        nodes.push(t_final);
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes (cells + 1).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_final(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn cell_width(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Marks grid endpoints where an operator value is a one-sided limit of the
/// defining formula rather than a direct evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EndpointFlags {
    /// Value at `t = 0` is the limit through the first cell's interpolant.
    pub left_limit: bool,
    /// The left-endpoint limit is formally divergent (input nonzero at 0);
    /// the stored value is a finite placeholder.
    pub left_divergent: bool,
    /// Mirror flags for the right endpoint `t = T`.
    pub right_limit: bool,
    pub right_divergent: bool,
}

/// Values of an `R^d`-valued function on the nodes of a [`TimeGrid`].
///
/// Storage is node-major: component `c` at node `k` sits at `k * dim + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    flags: EndpointFlags,
}

impl SampledFunction {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} values ({} nodes x dim {}), got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample value".into()));
        }
        Ok(Self { grid, dim, values, flags: EndpointFlags::default() })
    }

    /// Scalar function from a closure evaluated at the nodes.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), 1, values)
    }

    pub fn constant(grid: &TimeGrid, dim: usize, value: f64) -> Result<Self> {
        Self::new(grid.clone(), dim, vec![value; grid.len() * dim])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All values of component `c`, one per node.
    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(c).step_by(self.dim).copied()
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    /// Convenience accessor for scalar (`dim == 1`) functions.
    pub fn scalar(&self, node: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[node]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> EndpointFlags {
        self.flags
    }

    pub(crate) fn set_flags(&mut self, flags: EndpointFlags) {
        self.flags = flags;
    }

    pub(crate) fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("operands live on different grids".into()));
        }
        if self.dim != other.dim {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// Pointwise linear combination `a*self + b*other` (same grid).
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self::new(self.grid.clone(), self.dim, values)
    }

    /// Sup norm over all nodes and components.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = TimeGrid::uniform(2.0, 8).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.t_final(), 2.0);
    }

    #[test]
    fn rejects_non_increasing() {
        let err = TimeGrid::new(vec![0.0, 0.5, 0.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
        let err = TimeGrid::new(vec![0.0, 0.6, 0.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
    }

    #[test]
    fn refinement_only_touches_last_cell() {
        let base = TimeGrid::uniform(1.0, 16).unwrap();
        let fine = TimeGrid::uniform_refined(1.0, 16, 3).unwrap();
        assert_eq!(fine.len(), base.len() + 3);
        assert_eq!(&fine.nodes()[..16], &base.nodes()[..16]);
        assert_eq!(fine.t_final(), 1.0);
        let dt = 1.0 / 16.0;
        assert!((fine.nodes()[16] - (1.0 - dt / 2.0)).abs() < 1e-15);
        assert!((fine.nodes()[18] - (1.0 - dt / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn sampled_function_validates_lengths_and_finiteness() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(SampledFunction::new(g.clone(), 1, vec![0.0; 4]).is_err());
        assert!(SampledFunction::new(g.clone(), 1, vec![f64::NAN; 5]).is_err());
        let f = SampledFunction::new(g, 2, vec![1.0; 10]).unwrap();
        assert_eq!(f.value(3), &[1.0, 1.0]);
    }
}
