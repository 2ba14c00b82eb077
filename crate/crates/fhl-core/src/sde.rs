//! Forward solver for `dX = b(t, X) dt + sigma(t) dB^H` with additive
//! fractional noise, plus the second-moment growth diagnostic.
//!
//! Drift and diffusion come from a closed registry of families whose
//! Lipschitz / one-sided / Hölder constants are computed analytically at
//! construction. Arbitrary callbacks are rejected on purpose: the Harnack
//! bound is only as trustworthy as these constants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{DirectSampler, FbmPath};
use crate::grid::{SampledFunction, TimeGrid};
use crate::rng::{par_map_ordered, RngSeed};

/// The solution path of the forward equation; `value(0)` is the initial
/// condition.
pub type StatePath = SampledFunction;

/// Deterministic time-dependent offset `c(t)` shared by drift families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TimeProfile {
    Zero,
    Constant(Vec<f64>),
    Sine { amp: Vec<f64>, omega: f64 },
}

impl TimeProfile {
    fn dim_matches(&self, dim: usize) -> bool {
        match self {
            TimeProfile::Zero => true,
            TimeProfile::Constant(c) => c.len() == dim,
            TimeProfile::Sine { amp, .. } => amp.len() == dim,
        }
    }

    fn add_to(&self, t: f64, out: &mut [f64]) {
        match self {
            TimeProfile::Zero => {}
            TimeProfile::Constant(c) => {
                for (o, &v) in out.iter_mut().zip(c) {
                    *o += v;
                }
            }
            TimeProfile::Sine { amp, omega } => {
                let s = (omega * t).sin();
                for (o, &a) in out.iter_mut().zip(amp) {
                    *o += a * s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TimeProfile::Zero)
    }

    fn sup_norm(&self) -> f64 {
        match self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant(c) => c.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            TimeProfile::Sine { amp, .. } => amp.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

/// Drift families with analytically validated constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DriftFamily {
    /// `b(t, x) = diag(gains) x + c(t)`.
    Linear { gains: Vec<f64>, offset: TimeProfile },
    /// Componentwise `x - x^3`, frozen outside `|x| <= rho`.
    ClippedCubic { rho: f64, dim: usize },
    /// Componentwise `gains_i sin(x_i) + c_i(t)`.
    Sinusoidal { gains: Vec<f64>, offset: TimeProfile },
}

/// Drift with its declared Lipschitz constant `K` and one-sided constant
/// `L` (`<x, b(t,x)> <= L |x|^2`, exact only when the offset vanishes).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSpec {
    pub family: DriftFamily,
    pub dim: usize,
    /// Lipschitz constant K of x -> b(t, x).
    pub lipschitz: f64,
    /// One-sided linear-growth constant L.
    pub one_sided: f64,
    /// Sup norm of the additive offset (0 when absent).
    pub offset_sup: f64,
    /// Whether `<x, b> <= L |x|^2` holds exactly (no offset).
    pub h2_exact: bool,
}

impl DriftSpec {
    pub fn linear(gains: Vec<f64>, offset: TimeProfile) -> Result<Self> {
        let dim = gains.len();
        if dim == 0 || !offset.dim_matches(dim) {
            return Err(Error::InvalidInput("drift dimensions inconsistent".into()));
        }
        let lipschitz = gains.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let one_sided = gains.iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g));
        let offset_sup = offset.sup_norm();
        let h2_exact = offset.is_zero();
        Ok(Self { family: DriftFamily::Linear { gains, offset }, dim, lipschitz, one_sided, offset_sup, h2_exact })
    }

    pub fn zero(dim: usize) -> Self {
        Self::linear(vec![0.0; dim], TimeProfile::Zero).expect("zero drift is valid")
    }

    pub fn clipped_cubic(dim: usize, rho: f64) -> Result<Self> {
        if dim == 0 || !(rho > 0.0) {
            return Err(Error::InvalidInput("cubic drift needs dim >= 1 and rho > 0".into()));
        }
        // sup |1 - 3x^2| on [-rho, rho]
        let lipschitz = (3.0 * rho * rho - 1.0).max(1.0);
        Ok(Self {
            family: DriftFamily::ClippedCubic { rho, dim },
            dim,
            lipschitz,
            one_sided: 1.0,
            offset_sup: 0.0,
            h2_exact: true,
        })
    }

    pub fn sinusoidal(gains: Vec<f64>, offset: TimeProfile) -> Result<Self> {
        let dim = gains.len();
        if dim == 0 || !offset.dim_matches(dim) {
            return Err(Error::InvalidInput("drift dimensions inconsistent".into()));
        }
        let lipschitz = gains.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let offset_sup = offset.sup_norm();
        let h2_exact = offset.is_zero();
        Ok(Self {
            family: DriftFamily::Sinusoidal { gains, offset },
            dim,
            lipschitz,
            // |x_i a_i sin(x_i)| <= |a_i| x_i^2
            one_sided: lipschitz,
            offset_sup,
            h2_exact,
        })
    }

    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.family {
            DriftFamily::Linear { gains, offset } => {
                for ((o, &g), &xi) in out.iter_mut().zip(gains).zip(x) {
                    *o = g * xi;
                }
                offset.add_to(t, out);
            }
            DriftFamily::ClippedCubic { rho, .. } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    let z = xi.clamp(-*rho, *rho);
                    *o = z - z * z * z;
                }
            }
            DriftFamily::Sinusoidal { gains, offset } => {
                for ((o, &g), &xi) in out.iter_mut().zip(gains).zip(x) {
                    *o = g * xi.sin();
                }
                offset.add_to(t, out);
            }
        }
    }
}

/// Diagonal diffusion families; `sigma(t)` stays invertible on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SigmaFamily {
    Constant(Vec<f64>),
    /// `sigma_i(t) = base_i + slope_i t`.
    AffineT { base: Vec<f64>, slope: Vec<f64> },
    /// `sigma_i(t) = base_i + amp_i sin(omega t)`.
    SineT { base: Vec<f64>, amp: Vec<f64>, omega: f64 },
}

/// Diagonal diffusion with analytic Hölder data for its inverse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSpec {
    pub family: SigmaFamily,
    pub dim: usize,
    /// Hölder exponent of `t -> sigma^{-1}(t)`; 1 for these C^1 families.
    pub alpha0: f64,
    /// Hölder constant of `sigma^{-1}` on `[0, T]` at exponent `alpha0`.
    pub kbar: f64,
    pub sup: f64,
    pub sup_inv: f64,
}

const MIN_DIAG: f64 = 1e-9;

impl SigmaSpec {
    pub fn constant(diag: Vec<f64>) -> Result<Self> {
        let dim = diag.len();
        if dim == 0 {
            return Err(Error::InvalidInput("diffusion needs dim >= 1".into()));
        }
        let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if min < MIN_DIAG {
            return Err(Error::InvalidInput(format!(
                "diagonal entries must be bounded away from 0, min |sigma_i| = {min}"
            )));
        }
        let sup = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { family: SigmaFamily::Constant(diag), dim, alpha0: 1.0, kbar: 0.0, sup, sup_inv: 1.0 / min })
    }

    pub fn affine(base: Vec<f64>, slope: Vec<f64>, t_final: f64) -> Result<Self> {
        let dim = base.len();
        if dim == 0 || slope.len() != dim || !(t_final > 0.0) {
            return Err(Error::InvalidInput("diffusion dimensions inconsistent".into()));
        }
        let mut min = f64::INFINITY;
        let mut sup = 0.0f64;
        for (b, s) in base.iter().zip(&slope) {
            let lo = b + 0.0 * s;
            let hi = b + t_final * s;
            if lo.signum() != hi.signum() {
                return Err(Error::InvalidInput("diagonal entry changes sign on [0, T]".into()));
            }
            min = min.min(lo.abs().min(hi.abs()));
            sup = sup.max(lo.abs().max(hi.abs()));
        }
        if min < MIN_DIAG {
            return Err(Error::InvalidInput(format!(
                "diagonal entries must be bounded away from 0, min |sigma_i| = {min}"
            )));
        }
        let sup_inv = 1.0 / min;
        let max_slope = slope.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // |d/dt 1/sigma| <= |slope| / min^2
        let kbar = max_slope * sup_inv * sup_inv;
        Ok(Self { family: SigmaFamily::AffineT { base, slope }, dim, alpha0: 1.0, kbar, sup, sup_inv })
    }

    pub fn sinusoidal(base: Vec<f64>, amp: Vec<f64>, omega: f64) -> Result<Self> {
        let dim = base.len();
        if dim == 0 || amp.len() != dim {
            return Err(Error::InvalidInput("diffusion dimensions inconsistent".into()));
        }
        let mut min = f64::INFINITY;
        let mut sup = 0.0f64;
        for (b, a) in base.iter().zip(&amp) {
            min = min.min(b.abs() - a.abs());
            sup = sup.max(b.abs() + a.abs());
        }
        if min < MIN_DIAG {
            return Err(Error::InvalidInput(format!(
                "diagonal entries must be bounded away from 0, min |sigma_i| = {min}"
            )));
        }
        let sup_inv = 1.0 / min;
        let max_deriv = amp.iter().fold(0.0f64, |m, v| m.max(v.abs())) * omega.abs();
        let kbar = max_deriv * sup_inv * sup_inv;
        Ok(Self { family: SigmaFamily::SineT { base, amp, omega }, dim, alpha0: 1.0, kbar, sup, sup_inv })
    }

    pub fn diag_into(&self, t: f64, out: &mut [f64]) {
        match &self.family {
            SigmaFamily::Constant(d) => out.copy_from_slice(d),
            SigmaFamily::AffineT { base, slope } => {
                for ((o, &b), &s) in out.iter_mut().zip(base).zip(slope) {
                    *o = b + s * t;
                }
            }
            SigmaFamily::SineT { base, amp, omega } => {
                let s = (omega * t).sin();
                for ((o, &b), &a) in out.iter_mut().zip(base).zip(amp) {
                    *o = b + a * s;
                }
            }
        }
    }

    pub fn inv_diag_into(&self, t: f64, out: &mut [f64]) {
        self.diag_into(t, out);
        for o in out.iter_mut() {
            *o = 1.0 / *o;
        }
    }
}

/// Model data for the forward equation on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub h: f64,
    pub dim: usize,
    pub t_final: f64,
    pub drift: DriftSpec,
    pub sigma: SigmaSpec,
}

impl ModelSpec {
    pub fn new(h: f64, t_final: f64, drift: DriftSpec, sigma: SigmaSpec) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(Error::Domain(format!("Hurst index must be in (1/2, 1), got {h}")));
        }
        if !(t_final > 0.0) {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        if drift.dim != sigma.dim {
            return Err(Error::InvalidInput(format!(
                "drift dim {} != sigma dim {}",
                drift.dim, sigma.dim
            )));
        }
        if !(sigma.alpha0 > h - 0.5 && sigma.alpha0 <= 1.0) {
            return Err(Error::Domain(format!(
                "sigma^-1 Hölder exponent {} must lie in (H - 1/2, 1]",
                sigma.alpha0
            )));
        }
        let dim = drift.dim;
        Ok(Self { h, dim, t_final, drift, sigma })
    }

    /// Scalar Ornstein-Uhlenbeck-type model `dX = -lambda X dt + sigma dB^H`.
    pub fn scalar_linear(h: f64, t_final: f64, lambda: f64, sigma: f64) -> Result<Self> {
        Self::new(
            h,
            t_final,
            DriftSpec::linear(vec![-lambda], TimeProfile::Zero)?,
            SigmaSpec::constant(vec![sigma])?,
        )
    }
}

/// Explicit Euler with exact noise increments:
/// `X_{k+1} = X_k + b(t_k, X_k) dt_k + sigma(t_k) (B_{k+1} - B_k)`.
pub fn solve(model: &ModelSpec, x0: &[f64], noise: &FbmPath) -> Result<StatePath> {
    if x0.len() != model.dim || noise.dim() != model.dim {
        return Err(Error::InvalidInput("initial point / noise dimension mismatch".into()));
    }
    if noise.hurst() != model.h {
        return Err(Error::InvalidInput(format!(
            "noise Hurst {} != model Hurst {}",
            noise.hurst(),
            model.h
        )));
    }
    if noise.grid().t_final() != model.t_final {
        return Err(Error::InvalidInput("noise grid horizon differs from the model horizon".into()));
    }
    let grid = noise.grid().clone();
    let nodes = grid.nodes();
    let (n, d) = (grid.len(), model.dim);
    let mut states = vec![0.0; n * d];
    states[..d].copy_from_slice(x0);
    let mut bvec = vec![0.0; d];
    let mut svec = vec![0.0; d];
    for k in 0..n - 1 {
        let t = nodes[k];
        let dt = nodes[k + 1] - t;
        let (head, tail) = states.split_at_mut((k + 1) * d);
        let xk = &head[k * d..];
        model.drift.eval_into(t, xk, &mut bvec);
        model.sigma.diag_into(t, &mut svec);
        for c in 0..d {
            tail[c] = xk[c] + bvec[c] * dt + svec[c] * noise.increment(k, c);
        }
    }
    StatePath::new(grid, d, states)
}

/// One probe of the second-moment diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct MomentProbe {
    pub x: Vec<f64>,
    pub mean_sq: f64,
    pub se: f64,
    /// `E|X_T|^2 / (e^{2LT} (1 + |x|^2))`.
    pub ratio: f64,
}

/// Monte Carlo second-moment report; `m_hat` is the empirical candidate for
/// the growth constant.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub probes: Vec<MomentProbe>,
    pub m_hat: f64,
    pub one_sided: f64,
    pub t_final: f64,
    pub n_paths: usize,
}

/// Estimates `E|X_T^x|^2` against the growth envelope `e^{2LT}(1 + |x|^2)`
/// for each starting point.
pub fn moment_diagnostic(
    model: &ModelSpec,
    starts: &[Vec<f64>],
    grid: &TimeGrid,
    n_paths: usize,
    seed: RngSeed,
) -> Result<MomentReport> {
    if !model.drift.h2_exact {
        return Err(Error::InvalidInput(
            "one-sided growth constant is not exact for this drift (nonzero offset)".into(),
        ));
    }
    if grid.t_final() != model.t_final {
        return Err(Error::InvalidInput("grid horizon differs from the model horizon".into()));
    }
    let sampler = DirectSampler::new(grid, model.h)?;
    let envelope = (2.0 * model.drift.one_sided * model.t_final).exp();
    let mut probes = Vec::with_capacity(starts.len());
    let mut m_hat = 0.0f64;
    for (pi, x) in starts.iter().enumerate() {
        let samples = par_map_ordered(n_paths, |i| {
            let noise = sampler.sample(model.dim, seed.offset((pi * n_paths + i) as u64));
            let path = solve(model, x, &noise).expect("validated inputs");
            let xt = path.value(grid.len() - 1);
            xt.iter().map(|v| v * v).sum::<f64>()
        });
        let (mean_sq, se) = crate::numerics::stats::mean_se(&samples);
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        let ratio = mean_sq / (envelope * (1.0 + norm_sq));
        m_hat = m_hat.max(ratio);
        probes.push(MomentProbe { x: x.clone(), mean_sq, se, ratio });
    }
    Ok(MomentReport {
        probes,
        m_hat,
        one_sided: model.drift.one_sided,
        t_final: model.t_final,
        n_paths,
    })
}
