//! JSON experiment configuration. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fraclyap::lyapunov::{Candidate, CandidateKind, Generator};
use fraclyap::operators::{Family, FractionalOrder, KernelConfig};
use fraclyap::seir::{IncidenceSpec, RateConvention, SeirParams};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Verify,
    Equilibria,
    Stability,
    Sweep,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the subcommand.
    pub kind: Option<ExperimentKind>,
    pub order: Option<OrderConfig>,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub model: Option<ModelConfig>,
    pub incidence: Option<IncidenceConfig>,
    pub initial_state: Option<[f64; 4]>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub stability: Option<StabilityConfig>,
    pub sweep: Option<SweepConfig>,
    pub verify: Option<VerifyConfig>,
    /// Output file; `--out` takes precedence.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    pub family: Family,
    pub alpha: f64,
}

impl OrderConfig {
    pub fn build(&self) -> Result<FractionalOrder, CliError> {
        Ok(FractionalOrder::new(self.alpha, self.family)?)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: f64,
    pub d: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    #[serde(default)]
    pub convention: RateConvention,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceConfig {
    pub name: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    pub epsilon: f64,
    /// Explicit corpus; when absent `count` seeded states are drawn.
    pub initial_states: Option<Vec<[f64; 4]>>,
}

fn default_count() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    D,
    Beta,
    Sigma,
    Gamma,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl SweepConfig {
    /// Axis values in ascending order.
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let mut v = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) if n >= 1 => {
                if n == 1 {
                    vec![a]
                } else {
                    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                }
            }
            _ => return Err(CliError::config("sweep needs either `values` or `start`, `stop` and `points` (>= 1)")),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config("sweep values must be finite and non-empty"));
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_tolerance_factor")]
    pub tolerance_factor: f64,
    #[serde(default)]
    pub items: Vec<VerifyItem>,
}

fn default_tolerance_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyItem {
    pub trajectory: TrajectoryConfig,
    pub alpha: f64,
    pub families: Vec<Family>,
    pub candidates: Vec<CandidateConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub name: String,
    pub t_end: f64,
    pub intervals: usize,
    pub signal: Signal,
}

/// Test signals u(t) on [0, t_end].
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Linear { offset: f64, slope: f64 },
    Sine { offset: f64, amplitude: f64, frequency: f64, #[serde(default)] phase: f64 },
    Exponential { offset: f64, amplitude: f64, rate: f64 },
    Power { offset: f64, coefficient: f64, exponent: f64 },
    /// Solution of D^α u = target − u, u(0) = initial.
    Relaxation { family: Family, alpha: f64, initial: f64, target: f64 },
    /// Explicit samples on the uniform grid; the length must be intervals + 1.
    Samples { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub kind: CandidateKind,
    pub u_star: Option<f64>,
    pub generator: Option<String>,
}

impl CandidateConfig {
    pub fn build(&self) -> Result<Candidate, CliError> {
        let u_star = || self.u_star.ok_or_else(|| CliError::config(format!("{} candidate needs `u_star`", self.kind)));
        match self.kind {
            CandidateKind::Quadratic => Ok(Candidate::Quadratic),
            CandidateKind::Volterra => Ok(Candidate::volterra(u_star()?)?),
            CandidateKind::PsiGeneral => {
                let name = self.generator.as_deref().ok_or_else(|| CliError::config("PSI_GENERAL candidate needs `generator`"))?;
                Ok(Candidate::general(u_star()?, Generator::named(name)?)?)
            }
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn check_kind(&self, expected: ExperimentKind) -> Result<(), CliError> {
        match self.kind {
            Some(k) if k != expected => Err(CliError::config(format!("config kind {k:?} does not match the {expected:?} command"))),
            _ => Ok(()),
        }
    }

    pub fn order(&self) -> Result<FractionalOrder, CliError> {
        self.order.as_ref().ok_or_else(|| CliError::missing("order"))?.build()
    }

    pub fn params(&self) -> Result<SeirParams, CliError> {
        let m = self.model.ok_or_else(|| CliError::missing("model"))?;
        let alpha = self.order()?.alpha();
        Ok(SeirParams::new(m.lambda, m.d, m.beta, m.sigma, m.gamma, alpha)?.with_convention(m.convention))
    }

    pub fn incidence(&self) -> Result<IncidenceSpec, CliError> {
        let inc = self.incidence.as_ref().ok_or_else(|| CliError::missing("incidence"))?;
        Ok(IncidenceSpec::from_name(&inc.name, &inc.constants)?)
    }

    pub fn horizon(&self) -> Result<(f64, f64), CliError> {
        let t_end = self.t_end.ok_or_else(|| CliError::missing("t_end"))?;
        let dt = self.dt.ok_or_else(|| CliError::missing("dt"))?;
        Ok((t_end, dt))
    }

    pub fn kernel(&self) -> Result<KernelConfig, CliError> {
        self.kernel.validate()?;
        Ok(self.kernel)
    }
}
