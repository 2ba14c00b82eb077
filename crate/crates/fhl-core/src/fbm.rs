//! Fractional Brownian motion on a grid, by two independent routes.
//!
//! The direct route factorizes the covariance matrix `R_H(t_i, t_j)`; the
//! Volterra route pushes a Wiener path through the discrete `K_H` operator
//! and keeps the Wiener path around, which is what the Girsanov density
//! needs downstream. Each route validates the other in law.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fraccalc::KhOp;
use crate::grid::{SampledFunction, TimeGrid};
use crate::numerics::linalg::Cholesky;
use crate::rng::RngSeed;

/// fBm covariance `R_H(t, s) = (t^2H + s^2H - |t-s|^2H) / 2`.
pub fn covariance(t: f64, s: f64, h: f64) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::Domain(format!("times must be nonnegative, got ({t}, {s})")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("Hurst index must be in (0, 1), got {h}")));
    }
    let hh = 2.0 * h;
    Ok(0.5 * (t.powf(hh) + s.powf(hh) - (t - s).abs().powf(hh)))
}

/// Independent centered Gaussian increments with variance `dt_k`, one block
/// per component.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    grid: TimeGrid,
    dim: usize,
    /// Cell-major: increment of component `c` on cell `k` at `k * dim + c`.
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn generate(grid: &TimeGrid, dim: usize, seed: RngSeed) -> Self {
        let mut rng = seed.rng();
        let n_cells = grid.n_cells();
        let mut increments = vec![0.0; n_cells * dim];
        for k in 0..n_cells {
            let sd = grid.cell_width(k).sqrt();
            for c in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                increments[k * dim + c] = sd * z;
            }
        }
        Self { grid: grid.clone(), dim, increments }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Increment vector over cell `k`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// Piecewise-constant increment density `dW_k / dt_k`, sampled at nodes
    /// (the final node repeats the last cell value and is never read by the
    /// step-mode operator).
    pub fn increment_density(&self) -> SampledFunction {
        let n = self.grid.len();
        let mut values = vec![0.0; n * self.dim];
        for k in 0..self.grid.n_cells() {
            let dt = self.grid.cell_width(k);
            for c in 0..self.dim {
                values[k * self.dim + c] = self.increments[k * self.dim + c] / dt;
            }
        }
        for c in 0..self.dim {
            values[(n - 1) * self.dim + c] = values[(n - 2) * self.dim + c];
        }
        SampledFunction::new(self.grid.clone(), self.dim, values)
            .expect("increment density is finite by construction")
    }
}

/// fBm sample on a grid; carries the generating Wiener path when the
/// Volterra route produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    grid: TimeGrid,
    h: f64,
    dim: usize,
    /// Node-major values, `value(0) = 0`.
    values: Vec<f64>,
    wiener: Option<WienerPath>,
}

impl FbmPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Increment over cell `k`, component `c`.
    pub fn increment(&self, k: usize, c: usize) -> f64 {
        self.values[(k + 1) * self.dim + c] - self.values[k * self.dim + c]
    }

    pub fn wiener(&self) -> Option<&WienerPath> {
        self.wiener.as_ref()
    }

    /// Wraps externally produced node values (e.g. a path restricted to a
    /// coarser grid for refinement studies). No Wiener path is attached.
    pub fn from_values(grid: TimeGrid, h: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Domain(format!("Hurst index must be in (0, 1), got {h}")));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::InvalidInput("value count does not match grid".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite path value".into()));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidInput("path must start at 0".into()));
        }
        Ok(Self { grid, h, dim, values, wiener: None })
    }

    /// CSV rows `t, x0, .., x{d-1}`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "t")?;
        for c in 0..self.dim {
            write!(out, ",x{c}")?;
        }
        writeln!(out)?;
        for (k, &t) in self.grid.nodes().iter().enumerate() {
            write!(out, "{t}")?;
            for v in self.value(k) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn synthetic(grid: TimeGrid, h: f64, dim: usize, values: Vec<f64>) -> Self {
        Self { grid, h, dim, values, wiener: None }
    }
}

/// Covariance-factorization sampler; factorizes once, then each sample is a
/// triangular multiply per component.
#[derive(Debug, Clone)]
pub struct DirectSampler {
    grid: TimeGrid,
    h: f64,
    chol: Cholesky,
}

impl DirectSampler {
    pub fn new(grid: &TimeGrid, h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Domain(format!("Hurst index must be in (0, 1), got {h}")));
        }
        let nodes = &grid.nodes()[1..];
        let n = nodes.len();
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = covariance(nodes[i], nodes[j], h)?;
            }
        }
        let chol = Cholesky::new(&cov, n)?;
        Ok(Self { grid: grid.clone(), h, chol })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    pub fn sample(&self, dim: usize, seed: RngSeed) -> FbmPath {
        let mut rng = seed.rng();
        let n = self.grid.len();
        let m = n - 1;
        let mut values = vec![0.0; n * dim];
        let mut z = vec![0.0; m];
        let mut y = vec![0.0; m];
        for c in 0..dim {
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            self.chol.mul_vec(&z, &mut y);
            for k in 0..m {
                values[(k + 1) * dim + c] = y[k];
            }
        }
        FbmPath { grid: self.grid.clone(), h: self.h, dim, values, wiener: None }
    }
}

/// Draws node values jointly Gaussian with covariance `R_H`; no Wiener path
/// is retained.
pub fn sample_direct(grid: &TimeGrid, h: f64, dim: usize, seed: RngSeed) -> Result<FbmPath> {
    Ok(DirectSampler::new(grid, h)?.sample(dim, seed))
}

/// Volterra-route sampler: fBm as the discrete `K_H` image of a Wiener
/// increment density. The kernel itself is never evaluated pointwise; all
/// kernel action goes through the operator composition.
#[derive(Debug, Clone)]
pub struct VolterraSampler {
    op: KhOp,
}

impl VolterraSampler {
    pub fn new(grid: &TimeGrid, h: f64) -> Result<Self> {
        Ok(Self { op: KhOp::new_step(grid, h)? })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.op.grid()
    }

    pub fn hurst(&self) -> f64 {
        self.op.hurst()
    }

    pub fn sample(&self, dim: usize, seed: RngSeed) -> FbmPath {
        let wiener = WienerPath::generate(self.grid(), dim, seed);
        self.transform(wiener)
    }

    /// Applies the operator to an existing Wiener path.
    pub fn transform(&self, wiener: WienerPath) -> FbmPath {
        let density = wiener.increment_density();
        let transformed = self.op.apply(&density).expect("density lives on the operator grid");
        FbmPath {
            grid: self.grid().clone(),
            h: self.hurst(),
            dim: wiener.dim,
            values: transformed.values().to_vec(),
            wiener: Some(wiener),
        }
    }

    /// The underlying weight operator (for implied-covariance diagnostics).
    pub fn operator(&self) -> &KhOp {
        &self.op
    }
}

/// Volterra-route sample carrying its Wiener path.
pub fn sample_volterra(grid: &TimeGrid, h: f64, dim: usize, seed: RngSeed) -> Result<FbmPath> {
    Ok(VolterraSampler::new(grid, h)?.sample(dim, seed))
}

/// Discrete Hölder quotient `max |f(t_i) - f(t_j)| / |t_i - t_j|^lambda`
/// over all node pairs.
pub fn holder_norm(path: &FbmPath, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Domain(format!("Hölder exponent must be in (0, 1], got {lambda}")));
    }
    let nodes = path.grid.nodes();
    let n = nodes.len();
    let d = path.dim;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let mut gap2 = 0.0;
            for c in 0..d {
                let diff = path.values[j * d + c] - path.values[i * d + c];
                gap2 += diff * diff;
            }
            worst = worst.max(gap2.sqrt() / (nodes[j] - nodes[i]).powf(lambda));
        }
    }
    Ok(worst)
}
