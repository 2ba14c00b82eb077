//! Command implementations: experiment orchestration over the core library.

use std::fs;
use std::path::Path;

use serde_json::json;

use fhl_core::coupling::{coupling_report, energy_check, make_schedule, solve_coupled};
use fhl_core::ergodic::{
    self, ChainConfig, EmpiricalMeasure, entropy_cost_check, invariance_check, krylov_bogoliubov,
};
use fhl_core::fbm::{sample_direct, sample_volterra, VolterraSampler};
use fhl_core::girsanov::{
    constants_bundle, entropy_diagnostic, martingale_diagnostic,
};
use fhl_core::harnack::{
    change_of_measure_check, feller_diagnostic, log_harnack_check, power_harnack_check, Decision,
};
use fhl_core::rng::RngSeed;
use fhl_core::sde::{DriftFamily, SigmaFamily};
use fhl_core::TimeGrid;

use crate::config::ExperimentConfig;
use crate::report::{CheckOutcome, RunReport, Verdict};

/// Seed-stream stride separating the checks of one run.
const CHECK_STRIDE: u64 = 1 << 40;

pub struct RunError(pub String);

impl From<fhl_core::Error> for RunError {
    fn from(e: fhl_core::Error) -> Self {
        RunError(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, RunError>;

fn build_grid(cfg: &ExperimentConfig) -> Result<TimeGrid> {
    Ok(TimeGrid::uniform_refined(
        cfg.model.t,
        cfg.coupling.grid_cells,
        cfg.coupling.refine_levels,
    )?)
}

fn decision_verdict(d: Decision) -> Verdict {
    match d {
        Decision::Pass => Verdict::Pass,
        Decision::Fail => Verdict::Fail,
        Decision::InconclusiveWithinMcError => Verdict::Inconclusive,
    }
}

/// `constants`: prints the bound constants, both variants, itemized.
pub fn cmd_constants(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let model = cfg.build_model().map_err(|e| RunError(e.to_string()))?;
    let bundle = constants_bundle(&model, cfg.coupling.theta0)?;
    let bound = bundle.bound(&cfg.run.x, &cfg.run.y);
    let details = json!({
        "bundle": bundle,
        "bound_at_run_points": bound,
        "separation_sq": cfg.run.x.iter().zip(&cfg.run.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
    });
    let outcome = CheckOutcome::new("constants", Verdict::Pass, details);
    Ok(RunReport::new("constants", seed, vec![outcome]))
}

/// `verify`: runs the selected coupling/density/Harnack checks.
pub fn cmd_verify(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let model = cfg.build_model().map_err(|e| RunError(e.to_string()))?;
    let grid = build_grid(cfg)?;
    let theta0 = cfg.coupling.theta0;
    let f = cfg.test_function().map_err(|e| RunError(e.to_string()))?;
    let run = &cfg.run;
    let (x, y) = (run.x.as_slice(), run.y.as_slice());
    let mut checks = Vec::new();
    for (index, name) in run.checks.iter().enumerate() {
        let block = RngSeed::new(seed, (index as u64 + 1) * CHECK_STRIDE);
        let outcome = match name.as_str() {
            "energy" => {
                let schedule = make_schedule(model.drift.lipschitz, theta0, model.t_final)?;
                let sampler = VolterraSampler::new(&grid, model.h)?;
                let results = fhl_core::rng::par_map_ordered(run.n_traces, |i| {
                    let noise = sampler.sample(model.dim, block.offset(i as u64));
                    let trace = solve_coupled(&model, x, y, &noise, &schedule)
                        .expect("validated inputs");
                    let en = energy_check(&trace);
                    let rep = coupling_report(&trace, run.gap_tol, run.tau);
                    (en.max_slack, rep.max_budget_ratio, rep.rel_terminal_gap, rep.success)
                });
                let max_slack = results.iter().fold(0.0f64, |m, r| m.max(r.0));
                let max_ratio = results.iter().fold(0.0f64, |m, r| m.max(r.1));
                let max_rel_gap = results.iter().fold(0.0f64, |m, r| m.max(r.2));
                let successes = results.iter().filter(|r| r.3).count();
                let pass = max_slack <= run.tau && successes == run.n_traces;
                CheckOutcome::new(
                    "energy",
                    if pass { Verdict::Pass } else { Verdict::Fail },
                    json!({
                        "n_traces": run.n_traces,
                        "tau": run.tau,
                        "gap_tol": run.gap_tol,
                        "max_slack": max_slack,
                        "max_budget_ratio": max_ratio,
                        "max_rel_terminal_gap": max_rel_gap,
                        "successes": successes,
                    }),
                )
            }
            "martingale" => {
                let t = model.t_final;
                let probes = [0.25 * t, 0.5 * t, 0.75 * t, t];
                let rep = martingale_diagnostic(
                    &model, x, y, theta0, &grid, &probes, run.n_paths, block,
                )?;
                CheckOutcome::new(
                    "martingale",
                    if rep.pass { Verdict::Pass } else { Verdict::Fail },
                    rep,
                )
            }
            "entropy" => {
                let rep = entropy_diagnostic(&model, x, y, theta0, &grid, run.n_paths, block)?;
                CheckOutcome::new(
                    "entropy",
                    if rep.pass { Verdict::Pass } else { Verdict::Fail },
                    rep,
                )
            }
            "log-harnack" => {
                let rep =
                    log_harnack_check(&f, x, y, &model, theta0, &grid, run.n_paths, block)?;
                CheckOutcome::new("log-harnack", decision_verdict(rep.decision), rep)
            }
            "power-harnack" => {
                let rep = power_harnack_check(
                    run.power, &f, x, y, &model, theta0, &grid, run.n_paths, block,
                )?;
                CheckOutcome::new("power-harnack", decision_verdict(rep.decision), rep)
            }
            "change-of-measure" => {
                let rep =
                    change_of_measure_check(&f, x, y, &model, theta0, &grid, run.n_paths, block)?;
                let pass = rep.identity_holds && rep.unit_mean_holds;
                CheckOutcome::new(
                    "change-of-measure",
                    if pass { Verdict::Pass } else { Verdict::Fail },
                    rep,
                )
            }
            "feller" => {
                let rep = feller_diagnostic(
                    &f, x, &run.radii, &model, theta0, &grid, run.n_paths, block,
                )?;
                // Differences should not grow as the radius shrinks, up to
                // Monte Carlo noise.
                let mut rows = rep.rows.clone();
                rows.sort_by(|a, b| b.radius.total_cmp(&a.radius));
                let mut pass = true;
                for pair in rows.windows(2) {
                    let slack = 3.0 * pair[0].se.max(pair[1].se);
                    if pair[1].sup_diff > pair[0].sup_diff + slack {
                        pass = false;
                    }
                }
                CheckOutcome::new(
                    "feller",
                    if pass { Verdict::Pass } else { Verdict::Fail },
                    rep,
                )
            }
            other => CheckOutcome::skipped(other, "unknown check"),
        };
        checks.push(outcome);
    }
    Ok(RunReport::new("verify", seed, checks))
}

/// `invariant`: Krylov-Bogoliubov pooling, invariance distance, and the
/// entropy-cost inequality where the closed forms exist.
pub fn cmd_invariant(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<RunReport> {
    let model = cfg.build_model().map_err(|e| RunError(e.to_string()))?;
    let grid = build_grid(cfg)?;
    let inv = cfg
        .invariant
        .clone()
        .ok_or_else(|| RunError("config lacks the 'invariant' block".into()))?;
    let chain_cfg = ChainConfig {
        x0: inv.x0.clone(),
        n_steps: inv.n_steps,
        n_chains: inv.n_chains,
        seed: RngSeed::new(seed, CHECK_STRIDE),
    };
    let mu = krylov_bogoliubov(&chain_cfg, &model, &grid)?;
    let mut checks = Vec::new();
    checks.push(CheckOutcome::new(
        "krylov-bogoliubov",
        Verdict::Pass,
        json!({
            "n_samples": mu.len(),
            "second_moment": mu.second_moment(),
            "variance": mu.variance(),
            "tail_mass_r2": mu.tail_mass(2.0),
            "tail_mass_r4": mu.tail_mass(4.0),
        }),
    ));

    // Against the analytic stationary variance, in the scalar linear case
    // with constant diffusion.
    let scalar_linear_lambda = match (&model.drift.family, &model.sigma.family, model.dim) {
        (DriftFamily::Linear { gains, offset }, SigmaFamily::Constant(diag), 1)
            if offset.is_zero() && gains[0] < 0.0 =>
        {
            Some((-gains[0], diag[0]))
        }
        _ => None,
    };
    if inv.n_steps < 10 {
        checks.push(CheckOutcome::skipped(
            "variance-vs-stationary",
            "too few steps for the Cesàro average to stabilize",
        ));
    } else if let Some((lambda, sigma0)) = scalar_linear_lambda {
        let vbar = ergodic::ou_stationary_variance(lambda, sigma0, model.t_final, model.h);
        let got = mu.variance();
        let rel = (got - vbar).abs() / vbar;
        checks.push(CheckOutcome::new(
            "variance-vs-stationary",
            if rel <= 0.05 { Verdict::Pass } else { Verdict::Fail },
            json!({ "measured": got, "stationary": vbar, "rel_error": rel }),
        ));
    } else {
        checks.push(CheckOutcome::skipped(
            "variance-vs-stationary",
            "closed-form stationary variance exists only for the scalar linear model",
        ));
    }

    if inv.n_steps == 1 {
        checks.push(CheckOutcome::skipped(
            "invariance",
            "a single step carries no invariance information; measure emitted as-is",
        ));
    } else {
        let mu_probe = subsample_for_invariance(&mu)?;
        let rep = invariance_check(
            &mu_probe,
            &model,
            &grid,
            RngSeed::new(seed, 2 * CHECK_STRIDE),
            8,
        )?;
        checks.push(CheckOutcome::new(
            "invariance",
            if rep.ratio <= 2.0 { Verdict::Pass } else { Verdict::Fail },
            rep,
        ));
    }

    if inv.entropy_cost {
        let tilt = inv.tilt.unwrap_or(1.0);
        match entropy_cost_check(
            &model,
            tilt,
            cfg.coupling.theta0,
            4000,
            RngSeed::new(seed, 3 * CHECK_STRIDE),
        ) {
            Ok(rep) => {
                let w2_ok = if tilt == 0.0 {
                    true
                } else {
                    (rep.w2_sampled - rep.w2_expected).abs() / rep.w2_expected <= 0.05
                };
                checks.push(CheckOutcome::new(
                    "entropy-cost",
                    if rep.pass && w2_ok { Verdict::Pass } else { Verdict::Fail },
                    rep,
                ));
            }
            Err(fhl_core::Error::UnsupportedParameter(msg)) => {
                checks.push(CheckOutcome::skipped("entropy-cost", &msg));
            }
            Err(e) => return Err(e.into()),
        }
    }

    if cfg.output.csv {
        if let Some(dir) = out {
            let mut buf = Vec::new();
            mu.write_csv(&mut buf)?;
            fs::write(dir.join("measure.csv"), buf)?;
        }
    }
    Ok(RunReport::new("invariant", seed, checks))
}

fn subsample_for_invariance(mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    // The assignment route for d > 1 caps the sample count.
    if mu.dim() == 1 || mu.len() <= 512 {
        return Ok(mu.clone());
    }
    let stride = mu.len().div_ceil(512);
    let mut samples = Vec::new();
    let mut i = 0;
    while i < mu.len() {
        samples.extend_from_slice(mu.sample(i));
        i += stride;
    }
    Ok(EmpiricalMeasure::new(mu.dim(), samples)?)
}

/// `sample`: draws fractional paths and optionally exports them as CSV.
pub fn cmd_sample(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<RunReport> {
    let grid = build_grid(cfg)?;
    let run = &cfg.run;
    let h = cfg.model.h;
    let d = cfg.model.d;
    let mut csv = String::from("path,t");
    for c in 0..d {
        csv.push_str(&format!(",x{c}"));
    }
    csv.push('\n');
    let mut terminal_sq = 0.0;
    for i in 0..run.n_paths {
        let path_seed = RngSeed::new(seed, i as u64);
        let path = match run.route.as_str() {
            "direct" => sample_direct(&grid, h, d, path_seed)?,
            _ => sample_volterra(&grid, h, d, path_seed)?,
        };
        for (k, &t) in grid.nodes().iter().enumerate() {
            csv.push_str(&format!("{i},{t}"));
            for v in path.value(k) {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        terminal_sq +=
            path.value(grid.len() - 1).iter().map(|v| v * v).sum::<f64>() / run.n_paths as f64;
    }
    let mut wrote = None;
    if let Some(dir) = out {
        fs::write(dir.join("paths.csv"), &csv)?;
        wrote = Some("paths.csv");
    }
    let details = json!({
        "route": run.route,
        "n_paths": run.n_paths,
        "grid_nodes": grid.len(),
        "mean_terminal_sq": terminal_sq,
        "csv": wrote,
    });
    Ok(RunReport::new("sample", seed, vec![CheckOutcome::new("sample", Verdict::Pass, details)]))
}

/// `couple`: runs one coupled trace, reports its budget/energy summary, and
/// optionally exports the trace as CSV.
pub fn cmd_couple(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<RunReport> {
    let model = cfg.build_model().map_err(|e| RunError(e.to_string()))?;
    let grid = build_grid(cfg)?;
    let run = &cfg.run;
    let schedule = make_schedule(model.drift.lipschitz, cfg.coupling.theta0, model.t_final)?;
    let noise = sample_volterra(&grid, model.h, model.dim, RngSeed::new(seed, 0))?;
    let trace = solve_coupled(&model, &run.x, &run.y, &noise, &schedule)?;
    let energy = energy_check(&trace);
    let report = coupling_report(&trace, run.gap_tol, run.tau);
    let mut wrote = None;
    if let Some(dir) = out {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        fs::write(dir.join("trace.csv"), buf)?;
        wrote = Some("trace.csv");
    }
    let verdict = if report.success { Verdict::Pass } else { Verdict::Fail };
    let details = json!({
        "coupling": report,
        "energy": energy,
        "csv": wrote,
    });
    Ok(RunReport::new("couple", seed, vec![CheckOutcome::new("couple", verdict, details)]))
}
