//! Oracle-based integration tests: every expected value here is produced by
//! an independent route (closed forms, exact kernel masses, downsampled
//! common paths) rather than by the code under test.

use fhl_core::ergodic;
use fhl_core::fbm::{self, FbmPath};
use fhl_core::numerics::stats;
use fhl_core::rng::par_map_ordered;
use fhl_core::sde::{self, ModelSpec};
use fhl_core::{RngSeed, TimeGrid};

/// Exact mass of the second-moment kernel `H(2H-1)|s-r|^{2H-2}` over a cell
/// pair: the increment covariance of fractional Brownian motion.
fn kernel_mass(a: f64, b: f64, c: f64, d: f64, h: f64) -> f64 {
    let p = 2.0 * h;
    0.5 * ((d - a).abs().powf(p) + (c - b).abs().powf(p)
        - (c - a).abs().powf(p)
        - (d - b).abs().powf(p))
}

/// Independent double-quadrature oracle for the terminal variance of the
/// scalar linear model: exponentials at cell midpoints, kernel integrated
/// exactly per cell pair (including the singular diagonal).
fn ou_terminal_variance_oracle(lambda: f64, sigma: f64, t: f64, h: f64, n: usize) -> f64 {
    let dt = t / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let mi = (i as f64 + 0.5) * dt;
        let wi = (-lambda * (t - mi)).exp();
        for j in 0..n {
            let mj = (j as f64 + 0.5) * dt;
            let wj = (-lambda * (t - mj)).exp();
            let mass = kernel_mass(
                i as f64 * dt,
                (i + 1) as f64 * dt,
                j as f64 * dt,
                (j + 1) as f64 * dt,
                h,
            );
            total += wi * wj * mass;
        }
    }
    sigma * sigma * total
}

#[test]
fn ou_variance_matches_independent_double_quadrature() {
    for (lambda, t, h) in [(1.0, 1.0, 0.7), (0.5, 2.0, 0.6), (2.0, 0.5, 0.8)] {
        let production = ergodic::ou_terminal_variance(lambda, 1.0, t, h);
        let oracle = ou_terminal_variance_oracle(lambda, 1.0, t, h, 1024);
        assert!(
            (production - oracle).abs() / oracle < 2e-3,
            "lambda={lambda} t={t} h={h}: {production} vs {oracle}"
        );
    }
}

#[test]
fn solver_strong_order_on_common_noise_is_at_least_one() {
    // One fine path downsampled to coarser grids; the oracle is the exact
    // variation-of-constants discretization on the same increments.
    let h = 0.7;
    let lambda = 1.2;
    let sigma = 0.8;
    let fine_cells = 512usize;
    let fine_grid = TimeGrid::uniform(1.0, fine_cells).unwrap();
    let fine = fbm::sample_volterra(&fine_grid, h, 1, RngSeed::new(2024, 0)).unwrap();
    let mut errors = Vec::new();
    let mut widths = Vec::new();
    for level in [64usize, 128, 256] {
        let stride = fine_cells / level;
        let grid = TimeGrid::uniform(1.0, level).unwrap();
        let values: Vec<f64> =
            (0..=level).map(|k| fine.value(k * stride)[0]).collect();
        let noise = FbmPath::from_values(grid.clone(), h, 1, values.clone()).unwrap();
        let model = ModelSpec::scalar_linear(h, 1.0, lambda, sigma).unwrap();
        let path = sde::solve(&model, &[1.0], &noise).unwrap();
        // Exponential-integrator oracle on the same increments.
        let mut x = 1.0;
        for k in 0..level {
            let dt = grid.cell_width(k);
            let decay = (-lambda * dt).exp();
            x = decay * x + sigma * decay * (values[k + 1] - values[k]);
        }
        errors.push((path.value(level)[0] - x).abs());
        widths.push(1.0 / level as f64);
    }
    let slope = (errors[0] / errors[2]).log2() / (widths[0] / widths[2]).log2();
    assert!(slope >= 0.9, "observed strong order {slope}, errors {errors:?}");
}

#[test]
fn moment_ratio_is_stable_under_doubling_the_ensemble() {
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let model = ModelSpec::scalar_linear(0.7, 1.0, 1.0, 1.0).unwrap();
    let starts = vec![vec![0.0], vec![1.0], vec![3.0]];
    let small = sde::moment_diagnostic(&model, &starts, &grid, 2000, RngSeed::new(5, 0)).unwrap();
    let large = sde::moment_diagnostic(&model, &starts, &grid, 4000, RngSeed::new(6, 0)).unwrap();
    assert!(small.m_hat.is_finite() && large.m_hat.is_finite());
    for (a, b) in small.probes.iter().zip(&large.probes) {
        let gap = (a.mean_sq - b.mean_sq).abs();
        let band = 3.0 * (a.se * a.se + b.se * b.se).sqrt();
        assert!(gap <= band, "probe at {:?}: {} vs {} (band {band})", a.x, a.mean_sq, b.mean_sq);
    }
    // The chain contraction proxy: a = m_hat e^{2LT} < 1 gates ergodic runs.
    let a = large.m_hat * (2.0 * model.drift.one_sided * model.t_final).exp();
    assert!(a < 1.0, "contraction proxy {a}");
}

#[test]
fn volterra_empirical_covariance_matches_closed_form() {
    let n = 256;
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let h = 0.7;
    let n_paths = 5000;
    let sampler = fbm::VolterraSampler::new(&grid, h).unwrap();
    let pairs: Vec<(f64, f64)> = par_map_ordered(n_paths, |i| {
        let p = sampler.sample(1, RngSeed::new(400, i as u64));
        (p.value(n / 2)[0], p.value(n)[0])
    });
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n_paths as f64;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n_paths as f64;
    let cov = pairs
        .iter()
        .map(|p| (p.0 - mean_a) * (p.1 - mean_b))
        .sum::<f64>()
        / (n_paths - 1) as f64;
    let want = fbm::covariance(0.5, 1.0, h).unwrap();
    assert!(
        (cov - want).abs() / want < 0.07,
        "empirical covariance {cov} vs closed form {want}"
    );
}

#[test]
fn ou_second_moment_matches_gaussian_closed_form() {
    // E|X_T|^2 = e^{-2 lambda T} x^2 + q, with q from the production
    // quadrature (itself cross-checked against the 2-D oracle above).
    let grid = TimeGrid::uniform(1.0, 256).unwrap();
    let (h, lambda) = (0.7, 1.0);
    let model = ModelSpec::scalar_linear(h, 1.0, lambda, 1.0).unwrap();
    let report = sde::moment_diagnostic(
        &model,
        &[vec![0.0], vec![2.0], vec![6.0], vec![12.0]],
        &grid,
        4000,
        RngSeed::new(401, 0),
    )
    .unwrap();
    let q = ergodic::ou_terminal_variance(lambda, 1.0, 1.0, h);
    for probe in &report.probes {
        let x = probe.x[0];
        let want = (-2.0 * lambda).exp() * x * x + q;
        assert!(
            (probe.mean_sq - want).abs() <= 3.0 * probe.se + 0.02 * want,
            "x={x}: {} vs {want}",
            probe.mean_sq
        );
    }
    // The growth ratio levels off as |x| grows (closed-form asymptote 1).
    let r_large = report.probes[2].ratio;
    let r_larger = report.probes[3].ratio;
    assert!(
        (r_large - r_larger).abs() < 0.05,
        "ratio should stabilize: {r_large} vs {r_larger}"
    );
}

#[test]
fn both_sampling_routes_agree_in_law_at_the_terminal_time() {
    let n = 128;
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let h = 0.7;
    let n_paths = 2000;
    let direct_sampler = fbm::DirectSampler::new(&grid, h).unwrap();
    let volterra_sampler = fbm::VolterraSampler::new(&grid, h).unwrap();
    let direct: Vec<f64> =
        par_map_ordered(n_paths, |i| direct_sampler.sample(1, RngSeed::new(100, i as u64)).value(n)[0]);
    let volterra: Vec<f64> = par_map_ordered(n_paths, |i| {
        volterra_sampler.sample(1, RngSeed::new(200, i as u64)).value(n)[0]
    });
    let d = stats::ks_two_sample(&direct, &volterra);
    let crit = stats::ks_critical(n_paths, n_paths, 0.01);
    assert!(d < crit, "KS distance {d} exceeds the 1% critical value {crit}");
}
