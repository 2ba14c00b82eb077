//! Coupled pair `(X, Y)`: `X` solves the forward equation and `Y` carries
//! the extra singular drift `(X - Y)/zeta(t)` that forces the two paths
//! together by time `T`.
//!
//! The difference `D = X - Y` satisfies
//! `dD = (b(t,X) - b(t,Y)) dt - D/zeta dt`, which is integrated with the
//! exact integrating factor `exp(-∫ dr/zeta)` per cell; explicit stepping
//! is unstable as `zeta -> 0`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::FbmPath;
use crate::grid::TimeGrid;
use crate::sde::{solve, ModelSpec, StatePath};

/// Mean-reversion schedule: smooth, nonincreasing, strictly positive on
/// `[0, T)` with `zeta(T) = 0`, satisfying
/// `3 zeta'(t) - 2 K zeta(t) + 2 = theta0` identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSchedule {
    k: f64,
    theta0: f64,
    t_final: f64,
}

impl CouplingSchedule {
    pub fn new(k: f64, theta0: f64, t_final: f64) -> Result<Self> {
        if !(theta0 > 0.0 && theta0 < 2.0) {
            return Err(Error::Domain(format!("theta0 must lie in (0, 2), got {theta0}")));
        }
        if !(k >= 0.0) {
            return Err(Error::Domain(format!("Lipschitz constant must be >= 0, got {k}")));
        }
        if !(t_final > 0.0) {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        Ok(Self { k, theta0, t_final })
    }

    pub fn lipschitz(&self) -> f64 {
        self.k
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn zeta(&self, t: f64) -> f64 {
        let (k, th, tf) = (self.k, self.theta0, self.t_final);
        if k == 0.0 {
            (2.0 - th) * (tf - t) / 3.0
        } else {
            (2.0 - th) / (2.0 * k) * (-(2.0 * k / 3.0 * (t - tf)).exp_m1())
        }
    }

    pub fn zeta_prime(&self, t: f64) -> f64 {
        let (k, th, tf) = (self.k, self.theta0, self.t_final);
        if k == 0.0 {
            -(2.0 - th) / 3.0
        } else {
            -(2.0 - th) / 3.0 * (2.0 * k / 3.0 * (t - tf)).exp()
        }
    }

    /// `zeta(0)`, the sup of the schedule.
    pub fn zeta_sup(&self) -> f64 {
        self.zeta(0.0)
    }

    /// The horizon-free majorant `(2 - theta0)/(2K)`; none when `K = 0`.
    pub fn zeta_sup_majorant(&self) -> Option<f64> {
        (self.k > 0.0).then(|| (2.0 - self.theta0) / (2.0 * self.k))
    }

    /// `∫_0^t dr / zeta(r)` in closed form, for `t < T`.
    pub fn inv_zeta_integral(&self, t: f64) -> f64 {
        let (k, th, tf) = (self.k, self.theta0, self.t_final);
        let p = 3.0 / (2.0 - th);
        if k == 0.0 {
            p * (tf / (tf - t)).ln()
        } else {
            let a = 2.0 * k / 3.0;
            p * ((a * tf).exp_m1().ln() - (a * (tf - t)).exp_m1().ln())
        }
    }

    /// `exp(-∫_{t0}^{t1} dr / zeta)`; exactly 0 when `t1 = T`.
    pub fn decay_factor(&self, t0: f64, t1: f64) -> f64 {
        debug_assert!(t0 <= t1 && t1 <= self.t_final);
        if t1 >= self.t_final {
            return 0.0;
        }
        let (k, th, tf) = (self.k, self.theta0, self.t_final);
        let p = 3.0 / (2.0 - th);
        if k == 0.0 {
            ((tf - t1) / (tf - t0)).powf(p)
        } else {
            let a = 2.0 * k / 3.0;
            ((a * (tf - t1)).exp_m1() / (a * (tf - t0)).exp_m1()).powf(p)
        }
    }

    /// Residual of the defining identity `3 zeta' - 2K zeta + 2 - theta0`.
    pub fn identity_residual(&self, t: f64) -> f64 {
        3.0 * self.zeta_prime(t) - 2.0 * self.k * self.zeta(t) + 2.0 - self.theta0
    }
}

/// Builds the schedule for drift constant `K` and margin `theta0 in (0,2)`.
pub fn make_schedule(k: f64, theta0: f64, t_final: f64) -> Result<CouplingSchedule> {
    CouplingSchedule::new(k, theta0, t_final)
}

/// Joint output of one coupled solve.
#[derive(Debug, Clone)]
pub struct CouplingTrace {
    grid: TimeGrid,
    dim: usize,
    x_path: StatePath,
    y_path: StatePath,
    /// `X - Y` at every node.
    diff: Vec<f64>,
    /// `u(t_k) = sigma^{-1}(t_k) (X_k - Y_k) / zeta(t_k)` on retained nodes.
    u: Vec<f64>,
    noise: FbmPath,
    schedule: CouplingSchedule,
    /// Index of the last node with `t < T`.
    terminal_index: usize,
}

impl CouplingTrace {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_path(&self) -> &StatePath {
        &self.x_path
    }

    pub fn y_path(&self) -> &StatePath {
        &self.y_path
    }

    pub fn noise(&self) -> &FbmPath {
        &self.noise
    }

    pub fn schedule(&self) -> &CouplingSchedule {
        &self.schedule
    }

    pub fn terminal_index(&self) -> usize {
        self.terminal_index
    }

    /// Nodes `t_0, .., t_{terminal_index}` (all strictly before `T`).
    pub fn retained_nodes(&self) -> &[f64] {
        &self.grid.nodes()[..=self.terminal_index]
    }

    pub fn diff_value(&self, node: usize) -> &[f64] {
        &self.diff[node * self.dim..(node + 1) * self.dim]
    }

    pub fn u_value(&self, node: usize) -> &[f64] {
        debug_assert!(node <= self.terminal_index);
        &self.u[node * self.dim..(node + 1) * self.dim]
    }

    pub fn gap(&self, node: usize) -> f64 {
        self.diff_value(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `|X_s - Y_s|^2 / (theta0 zeta^3(s))` at a retained node.
    pub fn normalized_gap(&self, node: usize) -> f64 {
        let z = self.schedule.zeta(self.grid.nodes()[node]);
        let g = self.gap(node);
        g * g / (self.schedule.theta0 * z * z * z)
    }

    /// CSV rows `t, x.., y.., gap, zeta, u..`; `u` is reported as its limit 0
    /// at `t = T`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "t")?;
        for c in 0..self.dim {
            write!(out, ",x{c}")?;
        }
        for c in 0..self.dim {
            write!(out, ",y{c}")?;
        }
        write!(out, ",gap,zeta")?;
        for c in 0..self.dim {
            write!(out, ",u{c}")?;
        }
        writeln!(out)?;
        for (k, &t) in self.grid.nodes().iter().enumerate() {
            write!(out, "{t}")?;
            for v in self.x_path.value(k) {
                write!(out, ",{v}")?;
            }
            for v in self.y_path.value(k) {
                write!(out, ",{v}")?;
            }
            write!(out, ",{},{}", self.gap(k), self.schedule.zeta(t))?;
            if k <= self.terminal_index {
                for v in self.u_value(k) {
                    write!(out, ",{v}")?;
                }
            } else {
                for _ in 0..self.dim {
                    write!(out, ",0")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Runs the coupled system on one noise path. `X` is bit-identical to a
/// plain [`solve`] on the same noise; the difference equation is integrated
/// with the exact per-cell decay factor and the drift difference weighted by
/// a three-point Simpson rule of the decay kernel.
pub fn solve_coupled(
    model: &ModelSpec,
    x0: &[f64],
    y0: &[f64],
    noise: &FbmPath,
    schedule: &CouplingSchedule,
) -> Result<CouplingTrace> {
    if noise.wiener().is_none() {
        return Err(Error::InvalidInput(
            "coupling requires a Volterra-route noise path carrying its Wiener path".into(),
        ));
    }
    if y0.len() != model.dim {
        return Err(Error::InvalidInput("initial point dimension mismatch".into()));
    }
    let k_gap = (schedule.k - model.drift.lipschitz).abs();
    if k_gap > 1e-9 * (1.0 + model.drift.lipschitz) {
        return Err(Error::InvalidInput(format!(
            "schedule constant {} differs from the drift Lipschitz constant {}",
            schedule.k, model.drift.lipschitz
        )));
    }
    if schedule.t_final != model.t_final {
        return Err(Error::InvalidInput("schedule horizon differs from model horizon".into()));
    }
    let x_path = solve(model, x0, noise)?;
    let grid = noise.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), model.dim);

    let mut diff = vec![0.0; n * d];
    for c in 0..d {
        diff[c] = x0[c] - y0[c];
    }
    let mut db = vec![0.0; d];
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut yk = vec![0.0; d];
    for k in 0..n - 1 {
        let t0 = nodes[k];
        let t1 = nodes[k + 1];
        let phi = schedule.decay_factor(t0, t1);
        // Drift-difference weight ∫ exp(-∫_s^{t1} dr/zeta) ds by Simpson.
        let psi = if t1 >= schedule.t_final {
            0.0
        } else {
            let tm = 0.5 * (t0 + t1);
            (t1 - t0) / 6.0 * (phi + 4.0 * schedule.decay_factor(tm, t1) + 1.0)
        };
        let xk = x_path.value(k);
        for c in 0..d {
            yk[c] = xk[c] - diff[k * d + c];
        }
        model.drift.eval_into(t0, xk, &mut bx);
        model.drift.eval_into(t0, &yk, &mut by);
        for c in 0..d {
            db[c] = bx[c] - by[c];
        }
        for c in 0..d {
            diff[(k + 1) * d + c] = phi * diff[k * d + c] + psi * db[c];
        }
    }

    let mut y_values = vec![0.0; n * d];
    for k in 0..n {
        let xk = x_path.value(k);
        for c in 0..d {
            y_values[k * d + c] = xk[c] - diff[k * d + c];
        }
    }
    let y_path = StatePath::new(grid.clone(), d, y_values)?;

    let terminal_index = n - 2;
    let mut u = vec![0.0; (terminal_index + 1) * d];
    let mut inv_sigma = vec![0.0; d];
    for k in 0..=terminal_index {
        let z = schedule.zeta(nodes[k]);
        model.sigma.inv_diag_into(nodes[k], &mut inv_sigma);
        for c in 0..d {
            u[k * d + c] = inv_sigma[c] * diff[k * d + c] / z;
        }
    }

    Ok(CouplingTrace {
        grid,
        dim: d,
        x_path,
        y_path,
        diff,
        u,
        noise: noise.clone(),
        schedule: *schedule,
        terminal_index,
    })
}

/// Pathwise energy-bound report: for every retained node `s`,
/// `∫_0^s |X-Y|^2/zeta^4 dt + |X_s-Y_s|^2/(theta0 zeta^3(s))` is compared
/// against the budget `|x-y|^2/(theta0 zeta^3(0))`.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub budget: f64,
    /// Max over retained nodes of `(lhs - budget)/budget` (0 for a zero
    /// budget with zero lhs).
    pub max_slack: f64,
    /// Largest `|X_s-Y_s|^2/(theta0 zeta^3(s))` over retained nodes.
    pub max_normalized_gap: f64,
}

pub fn energy_check(trace: &CouplingTrace) -> EnergyReport {
    let nodes = trace.retained_nodes();
    let sched = trace.schedule();
    let budget = trace.normalized_gap(0);
    let mut running = 0.0;
    let mut max_slack: f64 = 0.0;
    let mut max_norm: f64 = 0.0;
    let mut prev_integrand = {
        let g0 = trace.gap(0);
        let z0 = sched.zeta(nodes[0]);
        g0 * g0 / (z0 * z0 * z0 * z0)
    };
    for (k, &t) in nodes.iter().enumerate() {
        if k > 0 {
            let g = trace.gap(k);
            let z = sched.zeta(t);
            let integrand = g * g / (z * z * z * z);
            running += 0.5 * (integrand + prev_integrand) * (t - nodes[k - 1]);
            prev_integrand = integrand;
        }
        let norm_gap = trace.normalized_gap(k);
        max_norm = max_norm.max(norm_gap);
        let lhs = running + norm_gap;
        let slack = if budget == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (lhs - budget) / budget
        };
        max_slack = max_slack.max(slack);
    }
    EnergyReport { budget, max_slack, max_normalized_gap: max_norm }
}

/// Success summary of one coupled trace.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    /// `|X - Y|` at the last retained node (t = T - delta).
    pub terminal_gap: f64,
    /// Terminal gap relative to the initial gap (0 when `x = y`).
    pub rel_terminal_gap: f64,
    /// Max over retained nodes of normalized gap / initial normalized gap.
    pub max_budget_ratio: f64,
    pub success: bool,
}

/// Flags success when the normalized gap stays within its initial budget
/// (slack `tau`) and the raw terminal gap is below `gap_tol * |x - y|`.
pub fn coupling_report(trace: &CouplingTrace, gap_tol: f64, tau: f64) -> CouplingReport {
    let terminal_gap = trace.gap(trace.terminal_index());
    let gap0 = trace.gap(0);
    let budget0 = trace.normalized_gap(0);
    let mut max_ratio: f64 = 0.0;
    for k in 0..=trace.terminal_index() {
        let r = if budget0 == 0.0 {
            if trace.normalized_gap(k) == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            trace.normalized_gap(k) / budget0
        };
        max_ratio = max_ratio.max(r);
    }
    let rel_terminal_gap = if gap0 == 0.0 { 0.0 } else { terminal_gap / gap0 };
    let success = max_ratio <= 1.0 + tau && rel_terminal_gap <= gap_tol;
    CouplingReport { terminal_gap, rel_terminal_gap, max_budget_ratio: max_ratio, success }
}
