//! Discretized Riemann-Liouville / Weyl fractional calculus.
//!
//! All operators use product integration: on each grid cell the singular
//! kernel is integrated exactly against a piecewise-linear (or piecewise-
//! constant) interpolant of the data. Naive Riemann sums are useless here
//! because kernels like `(r - s)^(-1/2 - H)` concentrate near the cell
//! endpoints.
//!
//! Right-sided operators return the real Weyl bracket without the complex
//! unit prefactor; the Riemann-Stieltjes pairing in [`zahle_integral`]
//! combines a left and a right bracket, and the two phases multiply to the
//! real sign `-1`, which is applied there.

use libm::tgamma;

use crate::error::{Error, Result};
use crate::grid::{EndpointFlags, SampledFunction, TimeGrid};
use crate::numerics::quad;

/// Fractional order in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("fractional order must be in (0, 1], got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Exact `∫_B^A u^(α-1) (p + q u) du` for `0 <= B < A`, `α` in `(0, 1]`.
fn cell_weak(alpha: f64, a: f64, b: f64, p: f64, q: f64) -> f64 {
    let e1 = (a.powf(alpha) - b.powf(alpha)) / alpha;
    let e2 = (a.powf(alpha + 1.0) - b.powf(alpha + 1.0)) / (alpha + 1.0);
    p * e1 + q * e2
}

/// Exact `∫_B^A u^(-α-1) (p + q u) du` for `0 < B < A`, `α` in `(0, 1)`.
fn cell_hyper(alpha: f64, a: f64, b: f64, p: f64, q: f64) -> f64 {
    let e1 = (b.powf(-alpha) - a.powf(-alpha)) / alpha;
    let e2 = (a.powf(1.0 - alpha) - b.powf(1.0 - alpha)) / (1.0 - alpha);
    p * e1 + q * e2
}

/// Left Riemann-Liouville integral `(I_{0+}^α f)(t_k)` at every node.
pub fn rl_integral_left(f: &SampledFunction, alpha: FracOrder) -> Result<SampledFunction> {
    let al = alpha.get();
    let grid = f.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), f.dim());
    let inv_gamma = 1.0 / tgamma(al);
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let fv: Vec<f64> = f.component(c).collect();
        for k in 1..n {
            let tk = nodes[k];
            let mut acc = 0.0;
            for j in 0..k {
                let dt = nodes[j + 1] - nodes[j];
                let a = tk - nodes[j];
                let b = tk - nodes[j + 1];
                let slope = (fv[j + 1] - fv[j]) / dt;
                // f(y) = (f_j + slope*A) - slope*u with u = t_k - y
                acc += cell_weak(al, a, b, fv[j] + slope * a, -slope);
            }
            out[k * d + c] = inv_gamma * acc;
        }
    }
    SampledFunction::new(grid, d, out)
}

/// Right Riemann-Liouville integral bracket `(I_{T-}^α f)(t_k)` (real part,
/// mirror of the left integral on `[t, T]`).
pub fn rl_integral_right(f: &SampledFunction, alpha: FracOrder) -> Result<SampledFunction> {
    let al = alpha.get();
    let grid = f.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), f.dim());
    let inv_gamma = 1.0 / tgamma(al);
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let fv: Vec<f64> = f.component(c).collect();
        for k in 0..n - 1 {
            let tk = nodes[k];
            let mut acc = 0.0;
            for j in k..n - 1 {
                let dt = nodes[j + 1] - nodes[j];
                let a = nodes[j] - tk;
                let b = nodes[j + 1] - tk;
                let slope = (fv[j + 1] - fv[j]) / dt;
                // u = y - t_k on [A, B]; f(y) = (f_j - slope*A) + slope*u
                acc += cell_weak(al, b, a, fv[j] - slope * a, slope);
            }
            out[k * d + c] = inv_gamma * acc;
        }
    }
    SampledFunction::new(grid, d, out)
}

/// Left Weyl derivative `(D_{0+}^α f)(t_k)` at every node.
///
/// The value at `t = 0` is the one-sided limit through the first cell's
/// interpolant (zero), flagged in the output; the limit is divergent unless
/// `f(0) = 0`.
pub fn weyl_derivative_left(f: &SampledFunction, alpha: FracOrder) -> Result<SampledFunction> {
    let al = alpha.get();
    if al >= 1.0 {
        return Err(Error::Domain("Weyl derivative needs order in (0, 1)".into()));
    }
    let grid = f.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), f.dim());
    let inv_gamma = 1.0 / tgamma(1.0 - al);
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let fv: Vec<f64> = f.component(c).collect();
        for k in 1..n {
            let tk = nodes[k];
            let mut sing = 0.0;
            for j in 0..k {
                let dt = nodes[j + 1] - nodes[j];
                let a = tk - nodes[j];
                let slope = (fv[j + 1] - fv[j]) / dt;
                if j + 1 == k {
                    // Interpolant of f(t_k) - f(y) vanishes linearly at y = t_k.
                    sing += slope * a.powf(1.0 - al) / (1.0 - al);
                } else {
                    let b = tk - nodes[j + 1];
                    sing += cell_hyper(al, a, b, fv[k] - fv[j] - slope * a, slope);
                }
            }
            out[k * d + c] = inv_gamma * (fv[k] / tk.powf(al) + al * sing);
        }
    }
    let mut result = SampledFunction::new(grid, d, out)?;
    result.set_flags(EndpointFlags {
        left_limit: true,
        left_divergent: f.value(0).iter().any(|&v| v != 0.0),
        ..EndpointFlags::default()
    });
    Ok(result)
}

/// Right Weyl bracket `(D_{T-}^α f)(t_k)` (real part, no phase factor).
pub fn weyl_derivative_right(f: &SampledFunction, alpha: FracOrder) -> Result<SampledFunction> {
    let al = alpha.get();
    if al >= 1.0 {
        return Err(Error::Domain("Weyl derivative needs order in (0, 1)".into()));
    }
    let grid = f.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), f.dim());
    let t_final = grid.t_final();
    let inv_gamma = 1.0 / tgamma(1.0 - al);
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let fv: Vec<f64> = f.component(c).collect();
        for k in 0..n - 1 {
            let tk = nodes[k];
            let mut sing = 0.0;
            for j in k..n - 1 {
                let dt = nodes[j + 1] - nodes[j];
                let slope = (fv[j + 1] - fv[j]) / dt;
                let a = nodes[j] - tk;
                let b = nodes[j + 1] - tk;
                if j == k {
                    // f(t_k) - f(y) vanishes linearly at y = t_k.
                    sing += -slope * b.powf(1.0 - al) / (1.0 - al);
                } else {
                    // u = y - t_k on [A, B]; f(t_k) - f(y) = (f_k - f_j + slope*A) - slope*u
                    sing += cell_hyper(al, b, a, fv[k] - fv[j] + slope * a, -slope);
                }
            }
            out[k * d + c] = inv_gamma * (fv[k] / (t_final - tk).powf(al) + al * sing);
        }
    }
    let mut result = SampledFunction::new(grid, d, out)?;
    result.set_flags(EndpointFlags {
        right_limit: true,
        right_divergent: f.value(n - 1).iter().any(|&v| v != 0.0),
        ..EndpointFlags::default()
    });
    Ok(result)
}

/// Riemann-Stieltjes integral `∫_0^T <f, dg>` through paired fractional
/// derivatives: the left bracket of order `α` against the right bracket of
/// order `1-α` applied to `g - g(T)`, with the phase product `-1`.
pub fn zahle_integral(f: &SampledFunction, g: &SampledFunction, alpha: FracOrder) -> Result<f64> {
    f.same_grid(g)?;
    let al = alpha.get();
    if al >= 1.0 {
        return Err(Error::Domain("pairing needs order in (0, 1)".into()));
    }
    let grid = f.grid();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), f.dim());
    let g_shift = {
        let tail = g.value(n - 1).to_vec();
        let values = (0..n)
            .flat_map(|k| {
                let row = g.value(k);
                tail.iter().zip(row).map(|(&gt, &gv)| gv - gt).collect::<Vec<_>>()
            })
            .collect();
        SampledFunction::new(grid.clone(), d, values)?
    };
    let lb = weyl_derivative_left(f, alpha)?;
    let rb = weyl_derivative_right(&g_shift, FracOrder::new(1.0 - al)?)?;

    let dot = |k: usize| -> f64 {
        lb.value(k).iter().zip(rb.value(k)).map(|(&a, &b)| a * b).sum()
    };
    // Trapezoid away from t = 0 plus a product-integration first cell that
    // restores the f(0) t^(-α) singularity dropped from the bracket sample.
    let t1 = nodes[1];
    let inv_gamma = 1.0 / tgamma(1.0 - al);
    let mut first = 0.0;
    for c in 0..d {
        let f0 = f.value(0)[c];
        let r0 = rb.value(0)[c];
        let r1 = rb.value(1)[c];
        let cs = f0 * inv_gamma;
        let sing = cs * t1.powf(1.0 - al) * (r0 / (1.0 - al) + (r1 - r0) / (2.0 - al));
        let rho1 = lb.value(1)[c] - cs * t1.powf(-al);
        first += sing + 0.5 * t1 * rho1 * r1;
    }
    let mut rest = 0.0;
    for k in 2..n {
        rest += 0.5 * (dot(k) + dot(k - 1)) * (nodes[k] - nodes[k - 1]);
    }
    Ok(-(first + rest))
}

/// How node samples are interpolated inside the Volterra operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Interp {
    /// Piecewise-linear through the node values (smooth functions).
    Linear,
    /// Piecewise-constant, each cell carrying its left node value
    /// (increment densities); the final node value is ignored.
    LeftConstant,
}

/// Writes the weights of the inner fractional convolution at node `i`:
/// `row . f = I_{0+}^{H-1/2}( s^{1/2-H} f )(t_i) * Γ(H-1/2)` (unnormalized).
fn kh_inner_row(nodes: &[f64], beta: f64, mode: Interp, i: usize, row: &mut [f64]) {
    row[..=i].iter_mut().for_each(|w| *w = 0.0);
    let ui = nodes[i];
    if i == 0 {
        return;
    }
    let t1 = nodes[1];
    if i == 1 {
        // Both endpoints singular in one cell: Beta-function closed form.
        let b0 = tgamma(1.0 - beta) * tgamma(beta) / tgamma(1.0);
        match mode {
            Interp::Linear => {
                let b1 = tgamma(2.0 - beta) * tgamma(beta) / tgamma(2.0);
                row[0] = b0 - b1;
                row[1] = b1;
            }
            Interp::LeftConstant => row[0] = b0,
        }
        return;
    }
    // First cell: integrate the y^(-β) weight exactly against a linear
    // interpolant of the remaining smooth factor (u_i - y)^(β-1) f(y).
    {
        let k0 = ui.powf(beta - 1.0);
        let k1 = (ui - t1).powf(beta - 1.0);
        let c1 = t1.powf(1.0 - beta) / (1.0 - beta);
        let c2 = t1.powf(1.0 - beta) / (2.0 - beta);
        match mode {
            Interp::Linear => {
                row[0] += k0 * (c1 - c2);
                row[1] += k1 * c2;
            }
            Interp::LeftConstant => {
                row[0] += k0 * (c1 - c2) + k1 * c2;
            }
        }
    }
    // Remaining cells: integrate (u_i - y)^(β-1) exactly against a linear
    // interpolant of w(y) = y^(-β) f(y).
    for j in 1..i {
        let dt = nodes[j + 1] - nodes[j];
        let a = ui - nodes[j];
        let b = ui - nodes[j + 1];
        let e1 = (a.powf(beta) - b.powf(beta)) / beta;
        let e2 = (a.powf(beta + 1.0) - b.powf(beta + 1.0)) / (beta + 1.0);
        let wj = nodes[j].powf(-beta);
        let wj1 = nodes[j + 1].powf(-beta);
        // w(y) = w_j f_j + (w_{j+1} f_{j+1} - w_j f_j) (y - t_j)/dt
        let coeff_left = (1.0 - a / dt) * e1 + e2 / dt;
        let coeff_right = (a / dt) * e1 - e2 / dt;
        match mode {
            Interp::Linear => {
                row[j] += wj * coeff_left;
                row[j + 1] += wj1 * coeff_right;
            }
            Interp::LeftConstant => {
                row[j] += wj * coeff_left + wj1 * coeff_right;
            }
        }
    }
}

/// Discrete Volterra operator `K_H` on `[0, T]` for `1/2 <= H < 1`,
/// realized as `I^1 ( s^{H-1/2} I^{H-1/2} ( s^{1/2-H} f ) )` and assembled
/// once per grid into lower-triangular weights.
#[derive(Debug, Clone)]
pub struct KhOp {
    grid: TimeGrid,
    h: f64,
    /// Row k: node weights for (K_H f)(t_k).
    weights: Vec<f64>,
    /// Row k: node weights for the derivative (K_H f)'(t_k).
    q_weights: Vec<f64>,
}

impl KhOp {
    fn build(grid: &TimeGrid, h: f64, mode: Interp) -> Result<Self> {
        if !(0.5..1.0).contains(&h) {
            return Err(Error::UnsupportedParameter(format!(
                "Volterra operator requires 1/2 <= H < 1, got {h}"
            )));
        }
        let nodes = grid.nodes();
        let n = grid.len();
        let mut q = vec![0.0; n * n];
        if h == 0.5 {
            // K_{1/2} is plain integration; the derivative is f itself.
            for i in 0..n {
                match mode {
                    Interp::Linear => q[i * n + i] = 1.0,
                    Interp::LeftConstant => {
                        let j = if i == n - 1 { i - 1 } else { i };
                        q[i * n + j] = 1.0;
                    }
                }
            }
        } else {
            let beta = h - 0.5;
            let inv_gamma = 1.0 / tgamma(beta);
            let mut row = vec![0.0; n];
            for i in 0..n {
                kh_inner_row(nodes, beta, mode, i, &mut row);
                let scale = nodes[i].powf(beta) * inv_gamma;
                for j in 0..=i {
                    q[i * n + j] = scale * row[j];
                }
            }
        }
        // Cumulative integral of the derivative rows.
        let mut w = vec![0.0; n * n];
        for i in 1..n {
            let half_dt = 0.5 * (nodes[i] - nodes[i - 1]);
            let step_dt = nodes[i] - nodes[i - 1];
            let (prev, cur) = w.split_at_mut(i * n);
            let prev_row = &prev[(i - 1) * n..i * n];
            let cur_row = &mut cur[..n];
            cur_row.copy_from_slice(prev_row);
            if h == 0.5 && mode == Interp::LeftConstant {
                // Exact partial sums of the increments.
                cur_row[i - 1] += step_dt * q[(i - 1) * n + (i - 1)];
            } else {
                for j in 0..=i {
                    cur_row[j] += half_dt * (q[(i - 1) * n + j] + q[i * n + j]);
                }
            }
        }
        Ok(Self { grid: grid.clone(), h, weights: w, q_weights: q })
    }

    /// Operator for piecewise-linear inputs.
    pub fn new_linear(grid: &TimeGrid, h: f64) -> Result<Self> {
        Self::build(grid, h, Interp::Linear)
    }

    /// Operator for piecewise-constant increment densities.
    pub fn new_step(grid: &TimeGrid, h: f64) -> Result<Self> {
        Self::build(grid, h, Interp::LeftConstant)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    /// Applies the operator to one scalar component.
    pub fn apply_component(&self, f: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        assert_eq!(f.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let row = &self.weights[i * n..i * n + i + 1];
            let mut acc = 0.0;
            for (j, &w) in row.iter().enumerate() {
                acc += w * f[j];
            }
            out[i] = acc;
        }
    }

    fn apply_rows(&self, f: &SampledFunction, rows: &[f64]) -> Result<SampledFunction> {
        if *f.grid() != self.grid {
            return Err(Error::InvalidInput("input sampled on a different grid".into()));
        }
        let n = self.grid.len();
        let d = f.dim();
        let mut out = vec![0.0; n * d];
        for c in 0..d {
            let fc: Vec<f64> = f.component(c).collect();
            for i in 0..n {
                let row = &rows[i * n..i * n + i + 1];
                let mut acc = 0.0;
                for (j, &w) in row.iter().enumerate() {
                    acc += w * fc[j];
                }
                out[i * d + c] = acc;
            }
        }
        SampledFunction::new(self.grid.clone(), d, out)
    }

    pub fn apply(&self, f: &SampledFunction) -> Result<SampledFunction> {
        self.apply_rows(f, &self.weights)
    }

    /// The integrand `(K_H f)'` on the same grid.
    pub fn apply_derivative(&self, f: &SampledFunction) -> Result<SampledFunction> {
        self.apply_rows(f, &self.q_weights)
    }
}

/// `K_H f` for piecewise-linear `f`, `1/2 <= H < 1`.
pub fn kh_apply(f: &SampledFunction, h: f64) -> Result<SampledFunction> {
    KhOp::new_linear(f.grid(), h)?.apply(f)
}

/// `K_H f` together with its derivative `(K_H f)'` on the same grid.
pub fn kh_apply_with_derivative(f: &SampledFunction, h: f64) -> Result<(SampledFunction, SampledFunction)> {
    let op = KhOp::new_linear(f.grid(), h)?;
    Ok((op.apply(f)?, op.apply_derivative(f)?))
}

/// `K_H f` for a piecewise-constant increment density (cell `j` carries the
/// value at node `j`). At `H = 1/2` this reproduces the partial sums of
/// `f_j * dt_j` exactly.
pub fn kh_apply_step(f: &SampledFunction, h: f64) -> Result<SampledFunction> {
    KhOp::new_step(f.grid(), h)?.apply(f)
}

/// Gauss-Legendre nodes/weights on [0,1] (4 points).
const GL4_X: [f64; 4] = [
    0.06943184420297371,
    0.33000947820757187,
    0.6699905217924281,
    0.9305681557970263,
];
const GL4_W: [f64; 4] = [
    0.17392742256872692,
    0.32607257743127305,
    0.32607257743127305,
    0.17392742256872692,
];

fn gl4(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    GL4_X.iter().zip(&GL4_W).map(|(&x, &w)| w * f(a + len * x)).sum::<f64>() * len
}

/// Inverse Volterra operator `K_H^{-1}` applied to `h' = hprime`:
/// `v(s) = s^{H-1/2} D_{0+}^{H-1/2} ( s^{1/2-H} hprime )(s)`, evaluated via
/// the three-term expansion (boundary term, power-weight-difference term,
/// increment term).
///
/// The value at `s = 0` is the adapted first-cell average of the constant-
/// input power law `hprime(0) Γ(3/2-H)/Γ(2-2H) s^{1/2-H}`, flagged in the
/// output. At `H = 1/2` the operator is the identity.
///
/// This routine integrates the singular terms by endpoint-substituted
/// Gauss-Legendre quadrature; it deliberately shares no quadrature code
/// with the weight-matrix route in the Girsanov module so that each can
/// check the other.
pub fn kh_inverse_apply(hprime: &SampledFunction, h: f64) -> Result<SampledFunction> {
    if h == 0.5 {
        return Ok(hprime.clone());
    }
    if !(0.5..1.0).contains(&h) {
        return Err(Error::UnsupportedParameter(format!(
            "inverse Volterra operator requires 1/2 < H < 1, got {h}"
        )));
    }
    let beta = h - 0.5;
    let grid = hprime.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), hprime.dim());
    let pref = 1.0 / tgamma(1.0 - beta);
    let const_ratio = tgamma(1.0 - beta) / tgamma(1.0 - 2.0 * beta);
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let u: Vec<f64> = hprime.component(c).collect();
        // Adapted stand-in for the divergent value at s = 0.
        out[c] = u[0] * const_ratio * nodes[1].powf(-beta) / (1.0 - beta);
        for k in 1..n {
            let rk = nodes[k];
            let rkb = rk.powf(-beta);
            let interp = |theta: f64, j: usize| {
                u[j] + (u[j + 1] - u[j]) * (theta - nodes[j]) / (nodes[j + 1] - nodes[j])
            };
            // Increment term: product integration (interpolant of u(r_k)-u
            // vanishes exactly at theta = r_k on the adjacent cell).
            let mut t3 = 0.0;
            for j in 0..k {
                let dt = nodes[j + 1] - nodes[j];
                let a = rk - nodes[j];
                let slope = (u[j + 1] - u[j]) / dt;
                if j + 1 == k {
                    t3 += slope * a.powf(1.0 - beta) / (1.0 - beta);
                } else {
                    let b = rk - nodes[j + 1];
                    t3 += cell_hyper(beta, a, b, u[k] - u[j] - slope * a, slope);
                }
            }
            // Power-weight-difference term, with substitutions that flatten
            // the theta^(-β) and (r_k-theta)^(-β) endpoint singularities.
            let diff_kernel =
                |theta: f64| (rkb - theta.powf(-beta)) * (rk - theta).powf(-beta - 1.0);
            let mut t2 = 0.0;
            for j in 0..k {
                let lo = nodes[j];
                let hi = nodes[j + 1];
                let left_singular = j == 0;
                let right_singular = j + 1 == k;
                let exponent = 1.0 / (1.0 - beta);
                if left_singular && right_singular {
                    let mid = 0.5 * hi;
                    t2 += gl4(
                        |z| {
                            let theta = mid * z.powf(exponent);
                            let dtheta = mid * exponent * z.powf(exponent - 1.0);
                            diff_kernel(theta) * interp(theta, j) * dtheta
                        },
                        0.0,
                        1.0,
                    );
                    t2 += gl4(
                        |z| {
                            let w = (hi - mid) * z.powf(exponent);
                            let theta = hi - w;
                            let dtheta = (hi - mid) * exponent * z.powf(exponent - 1.0);
                            diff_kernel(theta) * interp(theta, j) * dtheta
                        },
                        0.0,
                        1.0,
                    );
                } else if left_singular {
                    t2 += gl4(
                        |z| {
                            let theta = hi * z.powf(exponent);
                            let dtheta = hi * exponent * z.powf(exponent - 1.0);
                            diff_kernel(theta) * interp(theta, j) * dtheta
                        },
                        0.0,
                        1.0,
                    );
                } else if right_singular {
                    t2 += gl4(
                        |z| {
                            let w = (hi - lo) * z.powf(exponent);
                            let theta = hi - w;
                            let dtheta = (hi - lo) * exponent * z.powf(exponent - 1.0);
                            diff_kernel(theta) * interp(theta, j) * dtheta
                        },
                        0.0,
                        1.0,
                    );
                } else {
                    t2 += gl4(|theta| diff_kernel(theta) * interp(theta, j), lo, hi);
                }
            }
            let total = rkb * u[k] + beta * rk.powf(beta) * t2 + beta * t3;
            out[k * d + c] = pref * total;
        }
    }
    let mut result = SampledFunction::new(grid, d, out)?;
    result.set_flags(EndpointFlags {
        left_limit: true,
        left_divergent: hprime.value(0).iter().any(|&v| v != 0.0),
        ..EndpointFlags::default()
    });
    Ok(result)
}

/// `C_0(H) = ∫_0^1 (s^{1/2-H} - 1) (1-s)^{-1/2-H} ds` by adaptive quadrature
/// with endpoint-substituted halves; strictly positive for `H > 1/2`.
pub fn c0_constant(h: f64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Domain(format!("C0 constant requires 1/2 < H < 1, got {h}")));
    }
    let beta = h - 0.5;
    let integrand = |s: f64| (s.powf(-beta) - 1.0) * (1.0 - s).powf(-beta - 1.0);
    // Both endpoints carry an integrable power singularity; the substitution
    // x = z^(1/(1-β)) flattens each one. Split at s = 1/2.
    let e = 1.0 / (1.0 - beta);
    let z_split = 0.5f64.powf(1.0 - beta);
    // Left half: s = z^e; transformed integrand tends to e at z = 0.
    let left = quad::adaptive_simpson(
        |z| {
            if z == 0.0 {
                return e;
            }
            let s = z.powf(e);
            integrand(s) * e * z.powf(e - 1.0)
        },
        0.0,
        z_split,
        1e-12,
    );
    // Right half: 1 - s = z^e; transformed integrand tends to β/(1-β) at z = 0.
    let right = quad::adaptive_simpson(
        |z| {
            if z == 0.0 {
                return beta * e;
            }
            let s = 1.0 - z.powf(e);
            integrand(s) * e * z.powf(e - 1.0)
        },
        0.0,
        z_split,
        1e-12,
    );
    Ok(left + right)
}

/// Closed form `C_0(H) = (1 - Γ(3/2-H)^2/Γ(2-2H)) / (H - 1/2)`, obtained by
/// applying the power rule to a constant input of the inverse Volterra
/// operator. Used as the fast path inside weight assembly; `c0_constant`
/// is the quadrature route and the two are cross-checked in tests.
pub(crate) fn c0_gamma(h: f64) -> f64 {
    let beta = h - 0.5;
    (1.0 - tgamma(1.0 - beta).powi(2) / tgamma(1.0 - 2.0 * beta)) / beta
}

/// Companion constant `C_1(H) = ∫_0^1 (s^{1/2-H} - 1)(1-s)^{-1/2-H} s ds`,
/// closed form via the power rule applied to a linear input.
pub(crate) fn c1_gamma(h: f64) -> f64 {
    let beta = h - 0.5;
    let c1_tilde =
        (tgamma(1.0 - beta) * tgamma(2.0 - beta) / tgamma(2.0 - 2.0 * beta) - 1.0) / beta;
    1.0 / (1.0 - beta) - c1_tilde
}
