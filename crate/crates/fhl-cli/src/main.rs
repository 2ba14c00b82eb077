//! `fhl`: coupling, reweighting, and Harnack-inequality experiments for
//! SDEs driven by fractional Brownian motion (H > 1/2).
//!
//! Exit codes: 0 all checks pass, 2 at least one hard failure, 3 only
//! inconclusive verdicts, 64 malformed configuration.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use report::RunReport;

#[derive(Parser)]
#[command(name = "fhl", version, about = "Fractional-noise coupling and Harnack verification")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for report.json, meta.json, and CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (falls back to FHL_JOBS, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the explicit bound constants, both variants, itemized.
    Constants,
    /// Run the selected coupling / density / Harnack checks.
    Verify,
    /// Krylov-Bogoliubov averaging, invariance distance, entropy-cost.
    Invariant,
    /// Draw fractional paths (CSV export with --out).
    Sample,
    /// Run one coupled trace (CSV export with --out).
    Couple,
}

const EX_USAGE: u8 = 64;

fn fail_usage(msg: &str) -> ExitCode {
    eprintln!("fhl: {msg}");
    ExitCode::from(EX_USAGE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();

    let jobs = cli.jobs.or_else(|| std::env::var("FHL_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = jobs {
        if n == 0 {
            return fail_usage("--jobs must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("fhl: thread pool: {e}");
        }
    }

    let Some(config_path) = cli.config.as_ref() else {
        return fail_usage("--config PATH is required");
    };
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return fail_usage(&format!("cannot read {}: {e}", config_path.display())),
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail_usage(&e.to_string()),
    };
    let seed = cli.seed.unwrap_or(cfg.run.seed);

    if let Some(dir) = &cli.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail_usage(&format!("cannot create {}: {e}", dir.display()));
        }
    }
    let out_dir = cli.out.as_deref();

    let result: Result<RunReport, commands::RunError> = match cli.command {
        Command::Constants => commands::cmd_constants(&cfg, seed),
        Command::Verify => commands::cmd_verify(&cfg, seed),
        Command::Invariant => commands::cmd_invariant(&cfg, seed, out_dir),
        Command::Sample => commands::cmd_sample(&cfg, seed, out_dir),
        Command::Couple => commands::cmd_couple(&cfg, seed, out_dir),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("fhl: {}", e.0);
            return ExitCode::from(1);
        }
    };

    let rendered = report.to_json();
    println!("{rendered}");
    if let Some(dir) = out_dir {
        if let Err(e) = std::fs::write(dir.join("report.json"), &rendered) {
            eprintln!("fhl: cannot write report: {e}");
            return ExitCode::from(1);
        }
        // Timing is deliberately kept out of report.json so reruns stay
        // byte-identical.
        let meta = serde_json::json!({
            "command": report.command,
            "artifact_version": report.artifact_version,
            "wall_clock_ms": started.elapsed().as_millis() as u64,
        });
        if let Err(e) = std::fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&meta).expect("meta serializes"),
        ) {
            eprintln!("fhl: cannot write meta: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(report.exit_code())
}
