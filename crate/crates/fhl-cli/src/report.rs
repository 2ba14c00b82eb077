//! Deterministic run reports.
//!
//! The report on stdout (and `report.json` under `--out`) is a pure
//! function of the configuration: statistics, verdicts, seeds, and the
//! constants echo. Wall-clock timing goes to the separate `meta.json`
//! sidecar so that reruns stay byte-identical.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub verdict: Verdict,
    pub details: Value,
}

impl CheckOutcome {
    pub fn new(name: &str, verdict: Verdict, details: impl Serialize) -> Self {
        Self {
            name: name.to_string(),
            verdict,
            details: serde_json::to_value(details).expect("report types serialize"),
        }
    }

    pub fn skipped(name: &str, note: &str) -> Self {
        Self {
            name: name.to_string(),
            verdict: Verdict::Skipped,
            details: serde_json::json!({ "note": note }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub passes: usize,
    pub failures: usize,
    pub inconclusive: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub artifact_version: String,
    pub master_seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(command: &str, master_seed: u64, checks: Vec<CheckOutcome>) -> Self {
        let mut summary = Summary { passes: 0, failures: 0, inconclusive: 0, skipped: 0 };
        for c in &checks {
            match c.verdict {
                Verdict::Pass => summary.passes += 1,
                Verdict::Fail => summary.failures += 1,
                Verdict::Inconclusive => summary.inconclusive += 1,
                Verdict::Skipped => summary.skipped += 1,
            }
        }
        Self {
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            checks,
            summary,
        }
    }

    /// Exit code contract: 0 when nothing failed, 2 on any hard failure,
    /// 3 when the only blemishes are inconclusive verdicts.
    pub fn exit_code(&self) -> u8 {
        if self.summary.failures > 0 {
            2
        } else if self.summary.inconclusive > 0 {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
