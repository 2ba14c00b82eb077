//! Discrete-time semigroup of the horizon-T solution map, Krylov-Bogoliubov
//! averaging toward an invariant measure, exact empirical Wasserstein-2
//! distances, and the entropy-cost inequality in the linear-Gaussian case.
//!
//! Each chain step solves the forward equation over `[0, T]` with a fresh
//! independent fractional path; that independence is what makes the
//! discrete chain Markov even though the solution process itself is not.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::DirectSampler;
use crate::girsanov::constants_bundle;
use crate::grid::TimeGrid;
use crate::numerics::{assignment, quad};
use crate::rng::{par_map_ordered, stream_block, RngSeed};
use crate::sde::{solve, DriftFamily, ModelSpec, SigmaFamily};

/// Equal-weight empirical measure on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 || samples.is_empty() || samples.len() % dim != 0 {
            return Err(Error::InvalidInput("empty or ragged sample set".into()));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(Self { dim, samples })
    }

    pub fn from_scalars(samples: Vec<f64>) -> Result<Self> {
        Self::new(1, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar view (dim 1 only).
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::InvalidInput("measure is not one-dimensional".into()));
        }
        Ok(&self.samples)
    }

    /// Pooled second moment `E |x|^2`.
    pub fn second_moment(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// Componentwise sample variance summed over components.
    pub fn variance(&self) -> f64 {
        let n = self.len() as f64;
        let mut total = 0.0;
        for c in 0..self.dim {
            let mean = self.samples.iter().skip(c).step_by(self.dim).sum::<f64>() / n;
            let var = self
                .samples
                .iter()
                .skip(c)
                .step_by(self.dim)
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (n - 1.0);
            total += var;
        }
        total
    }

    /// Fraction of mass outside the centered ball of radius `r`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        let mut count = 0usize;
        for i in 0..self.len() {
            let norm2: f64 = self.sample(i).iter().map(|v| v * v).sum();
            if norm2 > r * r {
                count += 1;
            }
        }
        count as f64 / self.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for c in 0..self.dim {
            if c > 0 {
                write!(out, ",")?;
            }
            write!(out, "x{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            for (c, v) in self.sample(i).iter().enumerate() {
                if c > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Chain run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ChainConfig {
    pub x0: Vec<f64>,
    pub n_steps: usize,
    pub n_chains: usize,
    pub seed: RngSeed,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.n_chains == 0 || self.x0.is_empty() {
            return Err(Error::InvalidInput("counts must be positive".into()));
        }
        Ok(())
    }
}

/// Reusable one-step kernel `x -> X_T^x` with a cached noise factorization.
#[derive(Debug, Clone)]
pub struct ChainRunner {
    model: ModelSpec,
    sampler: DirectSampler,
}

impl ChainRunner {
    pub fn new(model: &ModelSpec, grid: &TimeGrid) -> Result<Self> {
        if grid.t_final() != model.t_final {
            return Err(Error::InvalidInput("grid horizon differs from the model horizon".into()));
        }
        Ok(Self { model: model.clone(), sampler: DirectSampler::new(grid, model.h)? })
    }

    pub fn step(&self, x: &[f64], seed: RngSeed) -> Vec<f64> {
        let noise = self.sampler.sample(self.model.dim, seed);
        let path = solve(&self.model, x, &noise).expect("validated inputs");
        path.value(path.grid().len() - 1).to_vec()
    }
}

/// Single transition of the discrete semigroup with a fresh fractional path.
pub fn chain_step(x: &[f64], model: &ModelSpec, grid: &TimeGrid, seed: RngSeed) -> Result<Vec<f64>> {
    Ok(ChainRunner::new(model, grid)?.step(x, seed))
}

/// Pools the states of `n_chains` independent chains at steps `1..=n_steps`
/// into one empirical measure (the Cesàro average of the step marginals).
pub fn krylov_bogoliubov(
    cfg: &ChainConfig,
    model: &ModelSpec,
    grid: &TimeGrid,
) -> Result<EmpiricalMeasure> {
    cfg.validate()?;
    if cfg.x0.len() != model.dim {
        return Err(Error::InvalidInput("start dimension mismatch".into()));
    }
    let runner = ChainRunner::new(model, grid)?;
    let steps = cfg.n_steps as u64;
    let per_chain = par_map_ordered(cfg.n_chains, |chain| {
        let mut x = cfg.x0.clone();
        let mut states = Vec::with_capacity(cfg.n_steps * model.dim);
        for s in 0..steps {
            x = runner.step(&x, cfg.seed.offset(chain as u64 * steps + s));
            states.extend_from_slice(&x);
        }
        states
    });
    EmpiricalMeasure::new(model.dim, per_chain.concat())
}

/// Exact empirical `W_2` in one dimension through the quantile coupling;
/// handles unequal sample counts by sweeping the merged quantile
/// breakpoints. Falls back to the assignment solver for `d > 1`.
pub fn w2_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if mu.dim() != 1 {
        return w2_exact_small(mu, nu);
    }
    let mut xs = mu.scalars()?.to_vec();
    let mut ys = nu.scalars()?.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let mut total = 0.0;
    let mut u = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        let next = ((i + 1) as f64 / n as f64).min((j + 1) as f64 / m as f64);
        let gap = xs[i] - ys[j];
        total += gap * gap * (next - u);
        u = next;
        if ((i + 1) as f64 / n as f64) <= next + f64::EPSILON {
            i += 1;
        }
        if ((j + 1) as f64 / m as f64) <= next + f64::EPSILON {
            j += 1;
        }
    }
    Ok(total.sqrt())
}

const ASSIGNMENT_LIMIT: usize = 512;

/// Exact `W_2` between equal-size empirical measures via the
/// minimum-cost assignment (cubic time).
pub fn w2_exact_small(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if mu.len() != nu.len() {
        return Err(Error::InvalidInput(format!(
            "assignment route needs equal sample counts, got {} vs {}; resample first",
            mu.len(),
            nu.len()
        )));
    }
    let n = mu.len();
    if n > ASSIGNMENT_LIMIT {
        return Err(Error::SizeOverflow { size: n, limit: ASSIGNMENT_LIMIT });
    }
    let d = mu.dim();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        let a = mu.sample(i);
        for j in 0..n {
            let b = nu.sample(j);
            let mut acc = 0.0;
            for c in 0..d {
                let diff = a[c] - b[c];
                acc += diff * diff;
            }
            cost[i * n + j] = acc;
        }
    }
    let (_, total) = assignment::solve_assignment(&cost, n);
    Ok((total / n as f64).sqrt())
}

/// Invariance diagnostic: distance between the measure and its one-step
/// pushforward, against a split-half sampling noise floor.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub w2_push: f64,
    pub noise_floor: f64,
    /// `w2_push / noise_floor` (infinite when the floor is zero).
    pub ratio: f64,
    pub n_samples: usize,
}

pub fn invariance_check(
    mu: &EmpiricalMeasure,
    model: &ModelSpec,
    grid: &TimeGrid,
    seed: RngSeed,
    n_bootstrap: usize,
) -> Result<InvarianceReport> {
    if mu.dim() != model.dim {
        return Err(Error::InvalidInput("measure dimension mismatch".into()));
    }
    let runner = ChainRunner::new(model, grid)?;
    let pushed_samples = par_map_ordered(mu.len(), |i| {
        runner.step(mu.sample(i), seed.offset(stream_block::PRIMARY + i as u64))
    });
    let pushed = EmpiricalMeasure::new(mu.dim(), pushed_samples.concat())?;
    let w2_push = w2_1d(mu, &pushed)?;

    // Noise floor: W2 between random halves of mu itself.
    let n = mu.len();
    let mut floor_acc = 0.0;
    let rounds = n_bootstrap.max(1);
    for b in 0..rounds {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = seed.offset(stream_block::AUX + b as u64).rng();
        for k in (1..n).rev() {
            let j = rng.random_range(0..=k);
            idx.swap(k, j);
        }
        let half = n / 2;
        let first = EmpiricalMeasure::new(
            mu.dim(),
            idx[..half].iter().flat_map(|&i| mu.sample(i).to_vec()).collect(),
        )?;
        let second = EmpiricalMeasure::new(
            mu.dim(),
            idx[half..].iter().flat_map(|&i| mu.sample(i).to_vec()).collect(),
        )?;
        floor_acc += w2_1d(&first, &second)?;
    }
    let noise_floor = floor_acc / rounds as f64;
    let ratio = if noise_floor == 0.0 {
        if w2_push == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        w2_push / noise_floor
    };
    Ok(InvarianceReport { w2_push, noise_floor, ratio, n_samples: n })
}

/// Terminal variance `q` of the scalar linear model
/// `dX = -lambda X dt + sigma dB^H`, i.e. the variance of the stochastic
/// convolution over one horizon. The double integral of the second-moment
/// kernel `H(2H-1)|s-r|^{2H-2}` collapses to a single smooth integrand
/// after the substitution `w = z^{1/(2H-1)}`.
pub fn ou_terminal_variance(lambda: f64, sigma: f64, t: f64, h: f64) -> f64 {
    assert!(h > 0.5 && h < 1.0 && t > 0.0);
    if lambda == 0.0 {
        return sigma * sigma * t.powf(2.0 * h);
    }
    let e = 1.0 / (2.0 * h - 1.0);
    let upper = t.powf(2.0 * h - 1.0);
    let integral = quad::adaptive_simpson(
        |z| {
            let w = z.powf(e);
            (-lambda * w).exp() * (-(-2.0 * lambda * (t - w)).exp_m1())
        },
        0.0,
        upper,
        1e-12,
    );
    sigma * sigma * h / lambda * integral
}

/// Fixed-point variance of the discrete chain for the scalar linear model:
/// `v = q / (1 - e^{-2 lambda T})`.
pub fn ou_stationary_variance(lambda: f64, sigma: f64, t: f64, h: f64) -> f64 {
    assert!(lambda > 0.0);
    let q = ou_terminal_variance(lambda, sigma, t, h);
    q / (-(-2.0 * lambda * t).exp_m1())
}

/// Entropy-cost check in the one closed-form case (scalar linear drift,
/// constant scalar diffusion): with `mu = N(0, v)` and `f mu = N(m, v)`,
/// the adjoint density `P_T^* f` is the density of `(f mu) P_T` with
/// respect to `mu`, the relative entropy is `e^{-2 lambda T} m^2 / (2 v)`,
/// and the transport cost is `m^2`.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyCostReport {
    pub tilt: f64,
    pub lhs_entropy: f64,
    pub rhs: f64,
    /// Bound rate `c(T)` per unit squared distance.
    pub rate: f64,
    pub q_variance: f64,
    pub stationary_variance: f64,
    /// Sampled `W_2(N(0, v), N(m, v))`, expected `|m|`.
    pub w2_sampled: f64,
    pub w2_expected: f64,
    pub pass: bool,
}

pub fn entropy_cost_check(
    model: &ModelSpec,
    tilt: f64,
    theta0: f64,
    n_samples: usize,
    seed: RngSeed,
) -> Result<EntropyCostReport> {
    let lambda = match (&model.drift.family, model.dim) {
        (DriftFamily::Linear { gains, offset }, 1) if offset.is_zero() && gains[0] < 0.0 => {
            -gains[0]
        }
        _ => {
            return Err(Error::UnsupportedParameter(
                "entropy-cost closed forms exist only for the scalar linear model \
                 with negative gain and no offset"
                    .into(),
            ))
        }
    };
    let sigma0 = match &model.sigma.family {
        SigmaFamily::Constant(d) if d.len() == 1 => d[0],
        _ => {
            return Err(Error::UnsupportedParameter(
                "entropy-cost closed forms need constant scalar diffusion".into(),
            ))
        }
    };
    let t = model.t_final;
    let h = model.h;
    let q = ou_terminal_variance(lambda, sigma0, t, h);
    let vbar = ou_stationary_variance(lambda, sigma0, t, h);
    let lhs = (-2.0 * lambda * t).exp() * tilt * tilt / (2.0 * vbar);
    let rate = constants_bundle(model, theta0)?.headline().rate;
    let rhs = rate * tilt * tilt;

    // Sampled transport cost between N(0, v) and N(m, v).
    let sd = vbar.sqrt();
    let mut rng_a = seed.offset(stream_block::PRIMARY).rng();
    let mut rng_b = seed.offset(stream_block::SECONDARY).rng();
    let xs: Vec<f64> =
        (0..n_samples).map(|_| sd * rng_a.sample::<f64, _>(StandardNormal)).collect();
    let ys: Vec<f64> =
        (0..n_samples).map(|_| tilt + sd * rng_b.sample::<f64, _>(StandardNormal)).collect();
    let w2_sampled =
        w2_1d(&EmpiricalMeasure::from_scalars(xs)?, &EmpiricalMeasure::from_scalars(ys)?)?;

    Ok(EntropyCostReport {
        tilt,
        lhs_entropy: lhs,
        rhs,
        rate,
        q_variance: q,
        stationary_variance: vbar,
        w2_sampled,
        w2_expected: tilt.abs(),
        pass: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::stats;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, n).unwrap()
    }

    fn ou_model(h: f64, lambda: f64) -> ModelSpec {
        ModelSpec::scalar_linear(h, 1.0, lambda, 1.0).unwrap()
    }

    #[test]
    fn chain_step_is_deterministic_per_seed() {
        let g = grid(32);
        let model = ou_model(0.7, 1.0);
        let a = chain_step(&[1.0], &model, &g, RngSeed::new(5, 9)).unwrap();
        let b = chain_step(&[1.0], &model, &g, RngSeed::new(5, 9)).unwrap();
        let c = chain_step(&[1.0], &model, &g, RngSeed::new(5, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pure_noise_step_is_gaussian_around_start() {
        let g = grid(64);
        let h = 0.7;
        let model = crate::sde::ModelSpec::new(
            h,
            1.0,
            crate::sde::DriftSpec::zero(1),
            crate::sde::SigmaSpec::constant(vec![1.0]).unwrap(),
        )
        .unwrap();
        let runner = ChainRunner::new(&model, &g).unwrap();
        let samples: Vec<f64> =
            par_map_ordered(4000, |i| runner.step(&[2.0], RngSeed::new(7, i as u64))[0]);
        let (mean, se) = stats::mean_se(&samples);
        assert!((mean - 2.0).abs() <= 3.0 * se);
        let var = stats::variance(&samples);
        assert!((var - 1.0).abs() < 0.07, "var {var}");
    }

    #[test]
    fn linear_step_mean_contracts() {
        let g = grid(128);
        let model = ou_model(0.7, 1.0);
        let runner = ChainRunner::new(&model, &g).unwrap();
        let samples: Vec<f64> =
            par_map_ordered(4000, |i| runner.step(&[3.0], RngSeed::new(11, i as u64))[0]);
        let (mean, se) = stats::mean_se(&samples);
        let want = 3.0 * (-1.0f64).exp();
        // Euler bias is O(dt); allow it on top of the MC band.
        assert!((mean - want).abs() <= 3.0 * se + 0.01, "mean {mean} want {want}");
    }

    #[test]
    fn kb_measure_second_moment_matches_chain_closed_form() {
        let g = grid(64);
        let lambda = 1.0;
        let h = 0.7;
        let model = ou_model(h, lambda);
        let cfg = ChainConfig { x0: vec![2.0], n_steps: 30, n_chains: 120, seed: RngSeed::new(13, 0) };
        let mu = krylov_bogoliubov(&cfg, &model, &g).unwrap();
        assert_eq!(mu.len(), 30 * 120);
        // Chain closed form: Var_k = q (1 - a^k)/(1 - a) with a = e^{-2 lambda T},
        // mean_k = x0 e^{-k lambda T}; average the step marginals.
        let a = (-2.0f64 * lambda).exp();
        let q = ou_terminal_variance(lambda, 1.0, 1.0, h);
        let mut want = 0.0;
        for k in 1..=30 {
            let mean_k = 2.0 * (-(k as f64) * lambda).exp();
            let var_k = q * (1.0 - a.powi(k)) / (1.0 - a);
            want += var_k + mean_k * mean_k;
        }
        want /= 30.0;
        let got = mu.second_moment();
        assert!((got - want).abs() / want < 0.1, "second moment {got} vs {want}");
        // Chebyshev tail proxy: mass outside radius r decays like 1/r^2.
        let m2 = mu.second_moment();
        for r in [1.0, 2.0, 4.0] {
            assert!(mu.tail_mass(r) <= m2 / (r * r) + 1e-12);
        }
    }

    #[test]
    fn w2_identical_measures_is_zero_and_symmetric() {
        let a = EmpiricalMeasure::from_scalars(vec![0.3, -1.0, 2.0, 0.7]).unwrap();
        let b = EmpiricalMeasure::from_scalars(vec![1.3, 0.0, -2.0, 0.9]).unwrap();
        assert_eq!(w2_1d(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(
            w2_1d(&a, &b).unwrap(),
            w2_1d(&b, &a).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn w2_of_three_point_shift_is_one() {
        let a = EmpiricalMeasure::from_scalars(vec![0.0, 1.0, 2.0]).unwrap();
        let b = EmpiricalMeasure::from_scalars(vec![1.0, 2.0, 3.0]).unwrap();
        // Brute force over all pairings gives W2^2 = 1.
        assert_abs_diff_eq!(w2_1d(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w2_exact_small(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn w2_location_shift_of_gaussians() {
        let mut rng = RngSeed::new(17, 0).rng();
        let xs: Vec<f64> = (0..4000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + 0.8).collect();
        let a = EmpiricalMeasure::from_scalars(xs).unwrap();
        let b = EmpiricalMeasure::from_scalars(ys).unwrap();
        assert_abs_diff_eq!(w2_1d(&a, &b).unwrap(), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn w2_exact_matches_permutation_brute_force_in_2d() {
        let a = EmpiricalMeasure::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let b = EmpiricalMeasure::new(2, vec![0.9, 0.1, 0.1, 0.9, 1.1, 1.1, -0.1, 0.2]).unwrap();
        let got = w2_exact_small(&a, &b).unwrap();
        // All 4! couplings.
        let perms = [
            [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
            [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
            [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
            [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
        ];
        let mut best = f64::INFINITY;
        for p in perms {
            let mut acc = 0.0;
            for (i, &j) in p.iter().enumerate() {
                let xa = a.sample(i);
                let xb = b.sample(j);
                acc += (xa[0] - xb[0]).powi(2) + (xa[1] - xb[1]).powi(2);
            }
            best = best.min(acc);
        }
        assert_abs_diff_eq!(got, (best / 4.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn w2_exact_size_guard() {
        let big = EmpiricalMeasure::from_scalars(vec![0.0; 600]).unwrap();
        assert!(matches!(
            w2_exact_small(&big, &big),
            Err(Error::SizeOverflow { .. })
        ));
    }

    #[test]
    fn ou_variance_quadrature_limits() {
        // lambda -> 0 recovers T^{2H} exactly.
        assert_abs_diff_eq!(ou_terminal_variance(0.0, 1.0, 1.0, 0.7), 1.0, epsilon = 1e-12);
        // Sigma scales quadratically.
        let q1 = ou_terminal_variance(1.0, 1.0, 1.0, 0.7);
        let q2 = ou_terminal_variance(1.0, 2.0, 1.0, 0.7);
        assert_abs_diff_eq!(q2 / q1, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn invariance_holds_on_the_analytic_gaussian() {
        let g = grid(64);
        let lambda = 1.0;
        let h = 0.7;
        let model = ou_model(h, lambda);
        let vbar = ou_stationary_variance(lambda, 1.0, 1.0, h);
        let mut rng = RngSeed::new(23, 0).rng();
        let samples: Vec<f64> =
            (0..3000).map(|_| vbar.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        let mu = EmpiricalMeasure::from_scalars(samples).unwrap();
        let report = invariance_check(&mu, &model, &g, RngSeed::new(29, 0), 8).unwrap();
        assert!(report.ratio <= 2.0, "report {report:?}");
    }

    #[test]
    fn far_from_stationary_measure_is_detected() {
        let g = grid(64);
        let lambda = 1.0;
        let model = ou_model(0.7, lambda);
        let mu = EmpiricalMeasure::from_scalars(vec![6.0; 1000]).unwrap();
        let report = invariance_check(&mu, &model, &g, RngSeed::new(31, 0), 4).unwrap();
        // Mean shift is (1 - e^{-lambda T}) |x0|, far above the floor.
        assert!(report.w2_push > 3.0, "w2 {}", report.w2_push);
        assert!(report.ratio > 10.0, "ratio {}", report.ratio);
    }

    #[test]
    fn entropy_cost_reference_configuration_passes() {
        let model = ou_model(0.7, 1.0);
        for m in [0.0, 0.5, 1.0, 2.0] {
            let report = entropy_cost_check(&model, m, 1.0, 4000, RngSeed::new(37, 0)).unwrap();
            assert!(report.pass, "tilt {m}: {report:?}");
            if m == 0.0 {
                assert_eq!(report.lhs_entropy, 0.0);
            } else {
                assert!((report.w2_sampled - m.abs()) / m.abs() < 0.05);
            }
        }
    }

    #[test]
    fn entropy_cost_rejects_unsupported_models() {
        let bad = crate::sde::ModelSpec::new(
            0.7,
            1.0,
            crate::sde::DriftSpec::clipped_cubic(1, 1.0).unwrap(),
            crate::sde::SigmaSpec::constant(vec![1.0]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            entropy_cost_check(&bad, 1.0, 1.0, 100, RngSeed::new(1, 0)),
            Err(Error::UnsupportedParameter(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn w2_metric_properties_on_small_scalar_instances(
            xs in prop::collection::vec(-5.0f64..5.0, 6),
            ys in prop::collection::vec(-5.0f64..5.0, 6),
            zs in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let a = EmpiricalMeasure::from_scalars(xs).unwrap();
            let b = EmpiricalMeasure::from_scalars(ys).unwrap();
            let c = EmpiricalMeasure::from_scalars(zs).unwrap();
            let ab = w2_1d(&a, &b).unwrap();
            let ba = w2_1d(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-10);
            prop_assert!(w2_1d(&a, &a).unwrap() < 1e-12);
            let ac = w2_1d(&a, &c).unwrap();
            let cb = w2_1d(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-10);
            // Quantile route agrees with the assignment route.
            let exact = w2_exact_small(&a, &b).unwrap();
            prop_assert!((ab - exact).abs() < 1e-10);
        }
    }
}
