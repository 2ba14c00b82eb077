//! JSON experiment configuration: schema, validation, and conversion into
//! model objects.
//!
//! Every declared constant (Lipschitz, one-sided, Hölder data, sup norms)
//! is cross-checked against the analytic value of the chosen family;
//! unknown keys are rejected so configs stay diffable and honest.

use serde::{Deserialize, Serialize};

use fhl_core::harnack::TestFunction;
use fhl_core::sde::{DriftSpec, ModelSpec, SigmaSpec, TimeProfile};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub coupling: CouplingBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub invariant: Option<InvariantBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub h: f64,
    pub t: f64,
    pub d: usize,
    pub drift: DriftBlock,
    pub sigma: SigmaBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct DriftBlock {
    pub family: String,
    #[serde(default)]
    pub gains: Option<Vec<f64>>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub offset: Option<OffsetBlock>,
    /// Declared Lipschitz constant K; must match the family value.
    pub lipschitz: f64,
    /// Declared one-sided constant L; must match the family value.
    pub one_sided: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum OffsetBlock {
    Zero,
    Constant { values: Vec<f64> },
    Sine { amp: Vec<f64>, omega: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaBlock {
    pub family: String,
    #[serde(default)]
    pub diag: Option<Vec<f64>>,
    #[serde(default)]
    pub base: Option<Vec<f64>>,
    #[serde(default)]
    pub slope: Option<Vec<f64>>,
    #[serde(default)]
    pub amp: Option<Vec<f64>>,
    #[serde(default)]
    pub omega: Option<f64>,
    /// Declared Hölder exponent of sigma^{-1}, in (H - 1/2, 1].
    pub alpha0: f64,
    /// Declared Hölder constant of sigma^{-1} at exponent alpha0.
    pub kbar: f64,
    pub sup: f64,
    pub sup_inv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingBlock {
    pub theta0: f64,
    pub grid_cells: usize,
    pub refine_levels: usize,
}

impl Default for CouplingBlock {
    fn default() -> Self {
        Self { theta0: 1.0, grid_cells: 256, refine_levels: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub n_paths: usize,
    pub n_traces: usize,
    pub seed: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default = "default_checks")]
    pub checks: Vec<String>,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub test_function: Option<TestFunctionBlock>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_route")]
    pub route: String,
}

fn default_checks() -> Vec<String> {
    ["energy", "martingale", "entropy", "log-harnack", "power-harnack", "change-of-measure", "feller"]
        .map(String::from)
        .to_vec()
}

fn default_power() -> f64 {
    2.0
}

fn default_radii() -> Vec<f64> {
    vec![0.5, 0.25, 0.1]
}

fn default_gap_tol() -> f64 {
    1e-2
}

fn default_tau() -> f64 {
    0.05
}

fn default_route() -> String {
    "volterra".into()
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            n_paths: 2000,
            n_traces: 100,
            seed: 42,
            x: vec![0.5],
            y: vec![0.0],
            checks: default_checks(),
            power: default_power(),
            test_function: None,
            radii: default_radii(),
            gap_tol: default_gap_tol(),
            tau: default_tau(),
            route: default_route(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum TestFunctionBlock {
    Constant { value: f64 },
    GaussBump { floor: f64, center: Vec<f64>, width: f64 },
    ClippedExp { weights: Vec<f64>, cap: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantBlock {
    pub x0: Vec<f64>,
    pub n_steps: usize,
    pub n_chains: usize,
    #[serde(default)]
    pub tilt: Option<f64>,
    #[serde(default)]
    pub entropy_cost: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub csv: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.build_model()?;
        if !(self.coupling.theta0 > 0.0 && self.coupling.theta0 < 2.0) {
            return Err(ConfigError(format!(
                "coupling.theta0 must lie in (0, 2), got {}",
                self.coupling.theta0
            )));
        }
        if self.coupling.grid_cells < 8 {
            return Err(ConfigError("coupling.grid_cells must be at least 8".into()));
        }
        if self.run.x.len() != self.model.d || self.run.y.len() != self.model.d {
            return Err(ConfigError("run.x / run.y must match the model dimension".into()));
        }
        if self.run.n_paths < 2 {
            return Err(ConfigError("run.n_paths must be at least 2".into()));
        }
        let known = default_checks();
        for c in &self.run.checks {
            if !known.contains(c) {
                return Err(ConfigError(format!(
                    "unknown check '{c}'; valid checks: {known:?}"
                )));
            }
        }
        if !["direct", "volterra"].contains(&self.run.route.as_str()) {
            return Err(ConfigError(format!(
                "run.route must be 'direct' or 'volterra', got '{}'",
                self.run.route
            )));
        }
        if let Some(inv) = &self.invariant {
            if inv.x0.len() != self.model.d {
                return Err(ConfigError("invariant.x0 must match the model dimension".into()));
            }
            if inv.n_steps == 0 || inv.n_chains == 0 {
                return Err(ConfigError("invariant chain counts must be positive".into()));
            }
        }
        self.test_function()?;
        Ok(())
    }

    /// Builds the model, cross-checking every declared constant against the
    /// family validators.
    pub fn build_model(&self) -> Result<ModelSpec, ConfigError> {
        let d = self.model.d;
        let offset = match &self.model.drift.offset {
            None | Some(OffsetBlock::Zero) => TimeProfile::Zero,
            Some(OffsetBlock::Constant { values }) => TimeProfile::Constant(values.clone()),
            Some(OffsetBlock::Sine { amp, omega }) => {
                TimeProfile::Sine { amp: amp.clone(), omega: *omega }
            }
        };
        let drift = match self.model.drift.family.as_str() {
            "linear" => {
                let gains = self
                    .model
                    .drift
                    .gains
                    .clone()
                    .ok_or_else(|| ConfigError("linear drift needs 'gains'".into()))?;
                DriftSpec::linear(gains, offset)
            }
            "clipped_cubic" => {
                let rho = self
                    .model
                    .drift
                    .rho
                    .ok_or_else(|| ConfigError("clipped_cubic drift needs 'rho'".into()))?;
                DriftSpec::clipped_cubic(d, rho)
            }
            "sinusoidal" => {
                let gains = self
                    .model
                    .drift
                    .gains
                    .clone()
                    .ok_or_else(|| ConfigError("sinusoidal drift needs 'gains'".into()))?;
                DriftSpec::sinusoidal(gains, offset)
            }
            other => return Err(ConfigError(format!("unknown drift family '{other}'"))),
        }
        .map_err(|e| ConfigError(e.to_string()))?;
        if drift.dim != d {
            return Err(ConfigError(format!(
                "drift parameters have dimension {}, model.d is {d}",
                drift.dim
            )));
        }
        if !close(drift.lipschitz, self.model.drift.lipschitz) {
            return Err(ConfigError(format!(
                "declared drift.lipschitz {} disagrees with the family value {}",
                self.model.drift.lipschitz, drift.lipschitz
            )));
        }
        if !close(drift.one_sided, self.model.drift.one_sided) {
            return Err(ConfigError(format!(
                "declared drift.one_sided {} disagrees with the family value {}",
                self.model.drift.one_sided, drift.one_sided
            )));
        }

        let sb = &self.model.sigma;
        let mut sigma = match sb.family.as_str() {
            "constant" => {
                let diag =
                    sb.diag.clone().ok_or_else(|| ConfigError("constant sigma needs 'diag'".into()))?;
                SigmaSpec::constant(diag)
            }
            "affine" => {
                let base =
                    sb.base.clone().ok_or_else(|| ConfigError("affine sigma needs 'base'".into()))?;
                let slope = sb
                    .slope
                    .clone()
                    .ok_or_else(|| ConfigError("affine sigma needs 'slope'".into()))?;
                SigmaSpec::affine(base, slope, self.model.t)
            }
            "sinusoidal" => {
                let base = sb
                    .base
                    .clone()
                    .ok_or_else(|| ConfigError("sinusoidal sigma needs 'base'".into()))?;
                let amp =
                    sb.amp.clone().ok_or_else(|| ConfigError("sinusoidal sigma needs 'amp'".into()))?;
                let omega =
                    sb.omega.ok_or_else(|| ConfigError("sinusoidal sigma needs 'omega'".into()))?;
                SigmaSpec::sinusoidal(base, amp, omega)
            }
            other => return Err(ConfigError(format!("unknown sigma family '{other}'"))),
        }
        .map_err(|e| ConfigError(e.to_string()))?;
        if sigma.dim != d {
            return Err(ConfigError(format!(
                "sigma parameters have dimension {}, model.d is {d}",
                sigma.dim
            )));
        }
        if !close(sigma.sup, sb.sup) {
            return Err(ConfigError(format!(
                "declared sigma.sup {} disagrees with the family value {}",
                sb.sup, sigma.sup
            )));
        }
        if !close(sigma.sup_inv, sb.sup_inv) {
            return Err(ConfigError(format!(
                "declared sigma.sup_inv {} disagrees with the family value {}",
                sb.sup_inv, sigma.sup_inv
            )));
        }
        // A declared exponent alpha0 < 1 is admissible for these C^1
        // families with the rescaled constant Kbar * T^(1 - alpha0).
        if !(sb.alpha0 > self.model.h - 0.5 && sb.alpha0 <= 1.0) {
            return Err(ConfigError(format!(
                "sigma.alpha0 {} must lie in (H - 1/2, 1]",
                sb.alpha0
            )));
        }
        let kbar_required = sigma.kbar * self.model.t.powf(1.0 - sb.alpha0);
        if !close(kbar_required, sb.kbar) {
            return Err(ConfigError(format!(
                "declared sigma.kbar {} disagrees with the family value {} at alpha0 {}",
                sb.kbar, kbar_required, sb.alpha0
            )));
        }
        sigma.alpha0 = sb.alpha0;
        sigma.kbar = sb.kbar;

        ModelSpec::new(self.model.h, self.model.t, drift, sigma)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn test_function(&self) -> Result<TestFunction, ConfigError> {
        let f = match &self.run.test_function {
            None => TestFunction::GaussBump {
                floor: 0.1,
                center: vec![0.0; self.model.d],
                width: 1.0,
            },
            Some(TestFunctionBlock::Constant { value }) => TestFunction::Constant(*value),
            Some(TestFunctionBlock::GaussBump { floor, center, width }) => {
                TestFunction::GaussBump { floor: *floor, center: center.clone(), width: *width }
            }
            Some(TestFunctionBlock::ClippedExp { weights, cap }) => {
                TestFunction::ClippedExp { weights: weights.clone(), cap: *cap }
            }
        };
        f.validate(self.model.d).map_err(|e| ConfigError(e.to_string()))?;
        Ok(f)
    }
}
