//! Fractional SEIR model with a general incidence function F(S, I):
//!
//! D^α S = Λ − d S − F(S, I)
//! D^α E = F(S, I) − m1 E
//! D^α I = σ E − m2 I
//! D^α R = γ I − d R
//!
//! with m1 = σ + d and m2 = γ + d. Under [`RateConvention::Base`] every rate
//! enters as its α-th power; the incidence is β times a shape function whose
//! named constants live in [`IncidenceSpec`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{FractionalOrder, KernelConfig};
use crate::quadrature::{integrate, AdaptiveOptions, QuadratureError};
use crate::solvers::{solve, FdeProblem, SolverError};
use crate::trajectory::StateTrajectory;

/// Step of the finite-difference fallback for custom incidence derivatives.
pub const FD_STEP: f64 = 1e-7;
/// States below this value are reported as positivity excursions.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Seed of the initial-state corpus when `FRACLYAP_SEED` is unset.
pub const DEFAULT_SEED: u64 = 20_240_917;
/// Environment variable overriding the corpus seed.
pub const SEED_ENV: &str = "FRACLYAP_SEED";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeirError {
    #[error("parameter {name} = {value} is out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("model order α = {model} differs from the solver order α = {solver}")]
    AlphaMismatch { model: f64, solver: f64 },
    #[error("incidence '{0}' is not known")]
    UnknownIncidence(String),
    #[error("incidence '{name}' does not take a constant named '{key}'")]
    UnknownConstant { name: String, key: String },
    #[error("incidence evaluation is not finite at S = {s}, I = {i}")]
    NonFiniteIncidence { s: f64, i: f64 },
    #[error("basic reproduction number is negative ({0}); the incidence specification is malformed")]
    NegativeR0(f64),
    #[error("no sign change of the endemic equation on (0, {upper}); the model is inconsistent with R0 = {r0}")]
    NoSignChange { upper: f64, r0: f64 },
    #[error("F1(x, {i}) is not positive at x = {x}")]
    NonPositiveIncidence { x: f64, i: f64 },
    #[error("state component {component} must be positive, got {value}")]
    NonPositiveState { component: &'static str, value: f64 },
    #[error("initial state must be finite and non-negative")]
    InvalidInitialState,
    #[error("check domain must have positive extent and at least 10 points per axis")]
    InvalidDomain,
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How the per-unit-time rates enter the fractional model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// Coefficients are rate^α.
    #[default]
    Base,
    /// Values are used as given.
    Powered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeirParams {
    /// Recruitment Λ.
    pub lambda: f64,
    /// Natural death rate d.
    pub d: f64,
    /// Transmission coefficient β.
    pub beta: f64,
    /// Progression rate σ from exposed to infective.
    pub sigma: f64,
    /// Recovery rate γ.
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default)]
    pub convention: RateConvention,
}

/// Model coefficients after applying the rate convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub lambda: f64,
    pub d: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Rates {
    /// Disease-free susceptible level Λ/d.
    pub fn s0(&self) -> f64 {
        self.lambda / self.d
    }
}

impl SeirParams {
    pub fn new(lambda: f64, d: f64, beta: f64, sigma: f64, gamma: f64, alpha: f64) -> Result<Self, SeirError> {
        let p = Self { lambda, d, beta, sigma, gamma, alpha, convention: RateConvention::Base };
        p.validate()?;
        Ok(p)
    }

    pub fn with_convention(mut self, convention: RateConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, SeirError> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SeirError> {
        let positive = [("lambda", self.lambda), ("d", self.d), ("sigma", self.sigma), ("gamma", self.gamma)];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SeirError::InvalidParameter { name, value });
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(SeirError::InvalidParameter { name: "beta", value: self.beta });
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SeirError::InvalidParameter { name: "alpha", value: self.alpha });
        }
        Ok(())
    }

    pub fn rates(&self) -> Rates {
        let c = |x: f64| match self.convention {
            RateConvention::Base => x.powf(self.alpha),
            RateConvention::Powered => x,
        };
        let (lambda, d, beta, sigma, gamma) = (c(self.lambda), c(self.d), c(self.beta), c(self.sigma), c(self.gamma));
        Rates { lambda, d, beta, sigma, gamma, m1: sigma + d, m2: gamma + d }
    }
}

type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// User-supplied incidence shape. Missing derivatives fall back to finite
/// differences with step [`FD_STEP`] (scaled by max(1, |x|)).
#[derive(Clone)]
pub struct CustomIncidence {
    pub f: Field2,
    pub f1: Option<Field2>,
    pub df_di: Option<Field2>,
    pub df1_ds: Option<Field2>,
    pub df1_di: Option<Field2>,
}

impl CustomIncidence {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), f1: None, df_di: None, df1_ds: None, df1_di: None }
    }
}

#[derive(Clone)]
enum Shape {
    Bilinear,
    BeddingtonDeAngelis { a1: f64, a2: f64, a3: f64 },
    SiSquared,
    Custom(CustomIncidence),
}

/// Incidence shape F̂(S, I) = I · F̂1(S, I); the model uses F = β F̂.
#[derive(Clone)]
pub struct IncidenceSpec {
    name: String,
    constants: BTreeMap<String, f64>,
    shape: Shape,
}

impl fmt::Debug for IncidenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IncidenceSpec").field("name", &self.name).field("constants", &self.constants).finish()
    }
}

fn forward_step(x: f64) -> f64 {
    FD_STEP * x.abs().max(1.0)
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = forward_step(x);
    if x - h < 0.0 {
        (f(x + h) - f(x)) / h
    } else {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }
}

impl IncidenceSpec {
    /// S · I.
    pub fn bilinear() -> Self {
        Self { name: "bilinear".into(), constants: BTreeMap::new(), shape: Shape::Bilinear }
    }

    /// S I / (1 + a1 S + a2 I + a3 S I).
    pub fn beddington_deangelis(a1: f64, a2: f64, a3: f64) -> Result<Self, SeirError> {
        for (name, value) in [("a1", a1), ("a2", a2), ("a3", a3)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(SeirError::InvalidParameter { name, value });
            }
        }
        let constants = [("a1", a1), ("a2", a2), ("a3", a3)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        Ok(Self { name: "beddington_deangelis".into(), constants, shape: Shape::BeddingtonDeAngelis { a1, a2, a3 } })
    }

    /// S · I²; violates the hypotheses and serves as a counterexample.
    pub fn si_squared() -> Self {
        Self { name: "si_squared".into(), constants: BTreeMap::new(), shape: Shape::SiSquared }
    }

    pub fn custom(name: impl Into<String>, inc: CustomIncidence) -> Self {
        Self { name: name.into(), constants: BTreeMap::new(), shape: Shape::Custom(inc) }
    }

    /// Built-in incidence by name with optional named constants.
    pub fn from_name(name: &str, constants: &BTreeMap<String, f64>) -> Result<Self, SeirError> {
        let allowed: &[&str] = match name {
            "bilinear" | "si_squared" => &[],
            "beddington_deangelis" => &["a1", "a2", "a3"],
            _ => return Err(SeirError::UnknownIncidence(name.to_string())),
        };
        if let Some(key) = constants.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(SeirError::UnknownConstant { name: name.to_string(), key: key.clone() });
        }
        let get = |k: &str| constants.get(k).copied().unwrap_or(0.0);
        match name {
            "bilinear" => Ok(Self::bilinear()),
            "si_squared" => Ok(Self::si_squared()),
            _ => Self::beddington_deangelis(get("a1"), get("a2"), get("a3")),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    pub fn f(&self, s: f64, i: f64) -> f64 {
        match &self.shape {
            Shape::Bilinear => s * i,
            Shape::BeddingtonDeAngelis { a1, a2, a3 } => s * i / (1.0 + a1 * s + a2 * i + a3 * s * i),
            Shape::SiSquared => s * i * i,
            Shape::Custom(c) => (c.f)(s, i),
        }
    }

    pub fn f1(&self, s: f64, i: f64) -> f64 {
        match &self.shape {
            Shape::Bilinear => s,
            Shape::BeddingtonDeAngelis { a1, a2, a3 } => s / (1.0 + a1 * s + a2 * i + a3 * s * i),
            Shape::SiSquared => s * i,
            Shape::Custom(c) => match &c.f1 {
                Some(f1) => f1(s, i),
                None if i > 0.0 => (c.f)(s, i) / i,
                None => self.df_di(s, 0.0),
            },
        }
    }

    pub fn df_di(&self, s: f64, i: f64) -> f64 {
        match &self.shape {
            Shape::Bilinear => s,
            Shape::BeddingtonDeAngelis { a1, a2, a3 } => {
                let den = 1.0 + a1 * s + a2 * i + a3 * s * i;
                s * (1.0 + a1 * s) / (den * den)
            }
            Shape::SiSquared => 2.0 * s * i,
            Shape::Custom(c) => match &c.df_di {
                Some(g) => g(s, i),
                None => central_diff(|x| (c.f)(s, x), i),
            },
        }
    }

    pub fn df1_ds(&self, s: f64, i: f64) -> f64 {
        match &self.shape {
            Shape::Bilinear => 1.0,
            Shape::BeddingtonDeAngelis { a1, a2, a3 } => {
                let den = 1.0 + a1 * s + a2 * i + a3 * s * i;
                (1.0 + a2 * i) / (den * den)
            }
            Shape::SiSquared => i,
            Shape::Custom(c) => match &c.df1_ds {
                Some(g) => g(s, i),
                None => central_diff(|x| self.f1(x, i), s),
            },
        }
    }

    pub fn df1_di(&self, s: f64, i: f64) -> f64 {
        match &self.shape {
            Shape::Bilinear => 0.0,
            Shape::BeddingtonDeAngelis { a1, a2, a3 } => {
                let den = 1.0 + a1 * s + a2 * i + a3 * s * i;
                -s * (a2 + a3 * s) / (den * den)
            }
            Shape::SiSquared => s,
            Shape::Custom(c) => match &c.df1_di {
                Some(g) => g(s, i),
                None => central_diff(|x| self.f1(s, x), i),
            },
        }
    }

    /// ∫_a^b dx / F̂1(x, i) for 0 < a, b.
    fn reciprocal_f1_integral(&self, a: f64, b: f64, i: f64) -> Result<f64, SeirError> {
        let log_ratio = ((b - a) / a).ln_1p();
        match &self.shape {
            Shape::Bilinear => Ok(log_ratio),
            Shape::BeddingtonDeAngelis { a1, a2, a3 } => Ok((1.0 + a2 * i) * log_ratio + (a1 + a3 * i) * (b - a)),
            Shape::SiSquared if i > 0.0 => Ok(log_ratio / i),
            _ => {
                let mut bad = None;
                let r = integrate(
                    |x| {
                        let v = self.f1(x, i);
                        if !(v > 0.0) && bad.is_none() {
                            bad = Some(x);
                        }
                        1.0 / v
                    },
                    a,
                    b,
                    &AdaptiveOptions::with_tolerance(1e-10),
                );
                if let Some(x) = bad {
                    return Err(SeirError::NonPositiveIncidence { x, i });
                }
                Ok(r?.value)
            }
        }
    }
}

/// Conditions of the incidence hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// F(S, 0) = 0.
    VanishesWithoutInfectives,
    /// F(0, I) = 0.
    VanishesWithoutSusceptibles,
    /// ∂F1/∂S > 0.
    F1IncreasingInS,
    /// ∂F1/∂I ≤ 0.
    F1NonIncreasingInI,
    /// ∂F/∂I ≥ 0.
    FNonDecreasingInI,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 5] = [
        Hypothesis::VanishesWithoutInfectives,
        Hypothesis::VanishesWithoutSusceptibles,
        Hypothesis::F1IncreasingInS,
        Hypothesis::F1NonIncreasingInI,
        Hypothesis::FNonDecreasingInI,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisViolation {
    pub condition: Hypothesis,
    pub s: f64,
    pub i: f64,
    /// The offending value (F or the relevant partial derivative).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub passed: bool,
    /// First violating grid point of each failed condition, in scan order.
    pub violations: Vec<HypothesisViolation>,
}

impl HypothesisReport {
    pub fn first_violation(&self) -> Option<&HypothesisViolation> {
        self.violations.first()
    }

    pub fn violation_of(&self, condition: Hypothesis) -> Option<&HypothesisViolation> {
        self.violations.iter().find(|v| v.condition == condition)
    }
}

/// Evaluates the hypotheses on an n × n grid over [0, s_max] × [0, i_max].
pub fn check_hypotheses(inc: &IncidenceSpec, s_max: f64, i_max: f64, n: usize) -> Result<HypothesisReport, SeirError> {
    if !(s_max > 0.0 && i_max > 0.0 && s_max.is_finite() && i_max.is_finite()) || n < 10 {
        return Err(SeirError::InvalidDomain);
    }
    // rounding slack for the equality and weak-inequality conditions
    let slack = 1e-12;
    let mut found: Vec<HypothesisViolation> = Vec::new();
    let mut record = |v: HypothesisViolation| {
        if !found.iter().any(|f| f.condition == v.condition) {
            found.push(v);
        }
    };
    for a in 0..n {
        let s = s_max * a as f64 / (n - 1) as f64;
        for b in 0..n {
            let i = i_max * b as f64 / (n - 1) as f64;
            let values = [
                inc.f(s, 0.0),
                inc.f(0.0, i),
                inc.df1_ds(s, i),
                inc.df1_di(s, i),
                inc.df_di(s, i),
            ];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(SeirError::NonFiniteIncidence { s, i });
            }
            let scale = 1.0 + inc.f1(s, i).abs();
            let checks = [
                values[0].abs() <= slack * scale,
                values[1].abs() <= slack * scale,
                values[2] > 0.0,
                values[3] <= slack * scale,
                values[4] >= -slack * scale,
            ];
            for ((condition, ok), value) in Hypothesis::ALL.into_iter().zip(checks).zip(values) {
                if !ok {
                    record(HypothesisViolation { condition, s, i, value });
                }
            }
        }
    }
    Ok(HypothesisReport { passed: found.is_empty(), violations: found })
}

/// σ ∂F/∂I(S0, 0) / (m1 m2).
pub fn r0(params: &SeirParams, inc: &IncidenceSpec) -> Result<f64, SeirError> {
    params.validate()?;
    let r = params.rates();
    let value = r.sigma * r.beta * inc.df_di(r.s0(), 0.0) / (r.m1 * r.m2);
    if !value.is_finite() {
        return Err(SeirError::NonFiniteIncidence { s: r.s0(), i: 0.0 });
    }
    if value < 0.0 {
        return Err(SeirError::NegativeR0(value));
    }
    Ok(value)
}

/// Right-hand side of the four-compartment system.
pub fn vector_field(rates: &Rates, inc: &IncidenceSpec, y: &[f64], out: &mut [f64]) {
    let (s, e, i) = (y[0], y[1], y[2]);
    let f = rates.beta * inc.f(s, i);
    out[0] = rates.lambda - rates.d * s - f;
    out[1] = f - rates.m1 * e;
    out[2] = rates.sigma * e - rates.m2 * i;
    if out.len() > 3 {
        out[3] = rates.gamma * i - rates.d * y[3];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// (S0, 0, 0, 0).
    pub disease_free: [f64; 4],
    pub r0: f64,
    /// (S*, E*, I*, R*) when r0 > 1.
    pub endemic: Option<[f64; 4]>,
    /// Max-norm of the right-hand side over the reported equilibria.
    pub residual_norm: f64,
}

impl EquilibriumReport {
    /// The equilibrium the dynamics are predicted to approach.
    pub fn attractor(&self) -> Attractor {
        if self.endemic.is_some() {
            Attractor::Endemic
        } else {
            Attractor::DiseaseFree
        }
    }

    pub fn attractor_state(&self) -> [f64; 4] {
        self.endemic.unwrap_or(self.disease_free)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attractor {
    DiseaseFree,
    Endemic,
}

impl fmt::Display for Attractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attractor::DiseaseFree => "disease_free",
            Attractor::Endemic => "endemic",
        })
    }
}

fn residual(rates: &Rates, inc: &IncidenceSpec, state: &[f64; 4]) -> f64 {
    let mut out = [0.0; 4];
    vector_field(rates, inc, state, &mut out);
    out.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Disease-free state, R0 and, when R0 > 1, the endemic state found by
/// bisection in E on (0, Λ/m1).
pub fn equilibria(params: &SeirParams, inc: &IncidenceSpec) -> Result<EquilibriumReport, SeirError> {
    let rates = params.rates();
    let r0 = r0(params, inc)?;
    let s0 = rates.s0();
    let disease_free = [s0, 0.0, 0.0, 0.0];
    let mut residual_norm = residual(&rates, inc, &disease_free);
    let endemic = if r0 > 1.0 {
        let upper = rates.lambda / rates.m1;
        let s_of = |e: f64| (rates.lambda - rates.m1 * e) / rates.d;
        let i_of = |e: f64| rates.sigma * e / rates.m2;
        // F(S(E), I(E)) − m1 E divided by E
        let q = |e: f64| rates.sigma / rates.m2 * rates.beta * inc.f1(s_of(e), i_of(e)) - rates.m1;
        let (mut lo, mut hi) = (0.0, upper);
        let (q_lo, q_hi) = (q(lo), q(hi));
        if !(q_lo > 0.0 && q_hi <= 0.0) {
            return Err(SeirError::NoSignChange { upper, r0 });
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if q(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let e = 0.5 * (lo + hi);
        let i = i_of(e);
        let state = [s_of(e), e, i, rates.gamma * i / rates.d];
        residual_norm = residual_norm.max(residual(&rates, inc, &state));
        Some(state)
    } else {
        None
    };
    Ok(EquilibriumReport { disease_free, r0, endemic, residual_norm })
}

/// First state component that dropped below [`POSITIVITY_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityWarning {
    pub step: usize,
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: StateTrajectory,
    pub positivity: Option<PositivityWarning>,
}

/// Integrates the model from `y0 = (S, E, I, R)` on [0, t_end].
pub fn simulate(
    params: &SeirParams,
    inc: &IncidenceSpec,
    y0: [f64; 4],
    order: FractionalOrder,
    t_end: f64,
    dt: f64,
    kernel: &KernelConfig,
) -> Result<Simulation, SeirError> {
    params.validate()?;
    if params.alpha != order.alpha() {
        return Err(SeirError::AlphaMismatch { model: params.alpha, solver: order.alpha() });
    }
    if y0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(SeirError::InvalidInitialState);
    }
    let rates = params.rates();
    let inc = inc.clone();
    let problem = FdeProblem::new(move |_, y, out| vector_field(&rates, &inc, y, out), y0.to_vec(), order, (0.0, t_end), dt)?
        .with_kernel(*kernel)?;
    let trajectory = solve(&problem)?;
    let positivity = trajectory.states().iter().enumerate().find_map(|(step, s)| {
        s.iter()
            .enumerate()
            .find(|(_, v)| **v < POSITIVITY_FLOOR)
            .map(|(component, &value)| PositivityWarning { step, component, value })
    });
    Ok(Simulation { trajectory, positivity })
}

/// G(x) = x − 1 − ln x.
pub fn g_entropy(x: f64) -> Result<f64, SeirError> {
    if !(x > 0.0) {
        return Err(SeirError::NonPositiveState { component: "x", value: x });
    }
    Ok(g_unchecked(x))
}

fn g_unchecked(x: f64) -> f64 {
    let dx = x - 1.0;
    dx - dx.ln_1p()
}

/// x − x* − x* ln(x/x*) = x* G(x/x*).
fn volterra(x: f64, x_star: f64) -> f64 {
    x_star * g_unchecked(x / x_star)
}

fn require_positive(component: &'static str, value: f64) -> Result<(), SeirError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(SeirError::NonPositiveState { component, value })
    }
}

/// Lyapunov functional for the disease-free equilibrium at (S, E, I).
pub fn lyapunov_v0(params: &SeirParams, inc: &IncidenceSpec, state: [f64; 3]) -> Result<f64, SeirError> {
    let [s, e, i] = state;
    require_positive("S", s)?;
    let rates = params.rates();
    let s0 = rates.s0();
    let anchor = inc.f1(s0, 0.0);
    if !(anchor > 0.0) {
        return Err(SeirError::NonPositiveIncidence { x: s0, i: 0.0 });
    }
    let head = (s - s0) - anchor * inc.reciprocal_f1_integral(s0, s, 0.0)?;
    Ok(head + e + rates.m1 / rates.sigma * i)
}

/// Lyapunov functional for the endemic equilibrium `endemic = (S*, E*, I*)`.
pub fn lyapunov_v1(params: &SeirParams, inc: &IncidenceSpec, endemic: [f64; 3], state: [f64; 3]) -> Result<f64, SeirError> {
    let [s, e, i] = state;
    let [ss, es, is] = endemic;
    for (name, v) in [("S", s), ("E", e), ("I", i), ("S*", ss), ("E*", es), ("I*", is)] {
        require_positive(name, v)?;
    }
    let rates = params.rates();
    let anchor = inc.f1(ss, is);
    let head = (s - ss) - anchor * inc.reciprocal_f1_integral(ss, s, is)?;
    Ok(head + volterra(e, es) + rates.m1 / rates.sigma * volterra(i, is))
}

/// H(I) = G(F(S,I)/F(S,I*)) − G(I/I*), non-positive under the hypotheses.
pub fn h_function(inc: &IncidenceSpec, s: f64, i: f64, i_star: f64) -> Result<f64, SeirError> {
    let ratio = inc.f(s, i) / inc.f(s, i_star);
    Ok(g_entropy(ratio)? - g_entropy(i / i_star)?)
}

/// Dissipation terms of V1 at a state, computed three ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct V1Dissipation {
    /// Ψ'(S) f_S + Ψ'(E) f_E + (m1/σ) Ψ'(I) f_I from the vector field.
    pub direct: f64,
    /// (1 − F*/F(S,I*)) d (S* − S) + F* · bracket.
    pub bracket_form: f64,
    /// The bracket 3 − a + b − c − I/I* − e.
    pub bracket: f64,
    /// −[G(I/I*) − G(b) + G(a) + G(c) + G(e)].
    pub g_terms: f64,
}

pub fn v1_dissipation(params: &SeirParams, inc: &IncidenceSpec, endemic: [f64; 3], state: [f64; 3]) -> Result<V1Dissipation, SeirError> {
    let [s, e, i] = state;
    let [ss, es, is] = endemic;
    for (name, v) in [("S", s), ("E", e), ("I", i), ("S*", ss), ("E*", es), ("I*", is)] {
        require_positive(name, v)?;
    }
    let rates = params.rates();
    let f = |a: f64, b: f64| rates.beta * inc.f(a, b);
    let f_star = f(ss, is);
    let f_s_istar = f(s, is);
    let f_si = f(s, i);
    let a = f_star / f_s_istar;
    let b = f_si / f_s_istar;
    let c = es * f_si / (e * f_star);
    let x = i / is;
    let ee = is * e / (i * es);
    let bracket = 3.0 - a + b - c - x - ee;
    let g_terms = -(g_entropy(x)? - g_entropy(b)? + g_entropy(a)? + g_entropy(c)? + g_entropy(ee)?);

    let mut field = [0.0; 3];
    vector_field(&rates, inc, &[s, e, i], &mut field);
    let direct = (1.0 - a) * field[0] + (1.0 - es / e) * field[1] + rates.m1 / rates.sigma * (1.0 - is / i) * field[2];
    let bracket_form = (1.0 - a) * rates.d * (ss - s) + f_star * bracket;
    Ok(V1Dissipation { direct, bracket_form, bracket, g_terms })
}

/// Ψ'(S) f_S + f_E + (m1/σ) f_I for V0, and its bound
/// (1 − F1(S0,0)/F1(S,0)) d (S0 − S) + (m1 m2/σ)(R0 − 1) I.
pub fn v0_dissipation(params: &SeirParams, inc: &IncidenceSpec, state: [f64; 3]) -> Result<(f64, f64), SeirError> {
    let [s, e, i] = state;
    require_positive("S", s)?;
    let rates = params.rates();
    let s0 = rates.s0();
    let slope = 1.0 - inc.f1(s0, 0.0) / inc.f1(s, 0.0);
    let mut field = [0.0; 3];
    vector_field(&rates, inc, &[s, e, i], &mut field);
    let direct = slope * field[0] + field[1] + rates.m1 / rates.sigma * field[2];
    let bound = slope * rates.d * (s0 - s) + rates.m1 * rates.m2 / rates.sigma * (r0(params, inc)? - 1.0) * i;
    Ok((direct, bound))
}

/// Corpus seed from `FRACLYAP_SEED`, or [`DEFAULT_SEED`].
pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

/// Random initial states S ∈ S0·[0.5, 1.5], E, I ∈ S0·[0.005, 0.1], R = 0.
pub fn seeded_initial_states(s0: f64, count: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s = rng.gen_range(0.5..1.5) * s0;
            let e = rng.gen_range(0.005..0.1) * s0;
            let i = rng.gen_range(0.005..0.1) * s0;
            [s, e, i, 0.0]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    pub t_max: f64,
    pub dt: f64,
    /// Convergence threshold on [`relative_distance`].
    pub epsilon: f64,
    pub kernel: KernelConfig,
}

/// ‖x − p‖∞ / max(1, ‖p‖∞) over (S, E, I).
pub fn relative_distance(x: &[f64], p: &[f64]) -> f64 {
    let diff = x.iter().zip(p).take(3).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
    let scale = p.iter().take(3).fold(1.0, |m, v| f64::max(m, v.abs()));
    diff / scale
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEntry {
    pub initial: [f64; 4],
    pub final_state: Option<[f64; 4]>,
    pub distance: Option<f64>,
    pub converged: bool,
    /// max_k (V_{k+1} − V_k) of V0 or V1 along the trajectory.
    pub max_lyapunov_increase: Option<f64>,
    pub final_lyapunov: Option<f64>,
    pub positivity: Option<PositivityWarning>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub equilibria: EquilibriumReport,
    pub attractor: Attractor,
    pub dt: f64,
    pub t_max: f64,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityReport {
    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.converged)
    }

    pub fn worst_distance(&self) -> f64 {
        self.entries.iter().map(|e| e.distance.unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }

    pub fn worst_lyapunov_increase(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_lyapunov_increase.unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Simulates each initial state and measures convergence to the predicted
/// attractor together with the monotonicity of its Lyapunov functional.
pub fn verify_stability(
    params: &SeirParams,
    inc: &IncidenceSpec,
    order: FractionalOrder,
    corpus: &[[f64; 4]],
    opts: &StabilityOptions,
) -> Result<StabilityReport, SeirError> {
    let eq = equilibria(params, inc)?;
    let target = eq.attractor_state();
    let entries = corpus
        .par_iter()
        .map(|&y0| stability_entry(params, inc, order, y0, &eq, &target, opts))
        .collect();
    Ok(StabilityReport { attractor: eq.attractor(), equilibria: eq, dt: opts.dt, t_max: opts.t_max, entries })
}

fn stability_entry(
    params: &SeirParams,
    inc: &IncidenceSpec,
    order: FractionalOrder,
    y0: [f64; 4],
    eq: &EquilibriumReport,
    target: &[f64; 4],
    opts: &StabilityOptions,
) -> StabilityEntry {
    let mut entry = StabilityEntry {
        initial: y0,
        final_state: None,
        distance: None,
        converged: false,
        max_lyapunov_increase: None,
        final_lyapunov: None,
        positivity: None,
        error: None,
    };
    let sim = match simulate(params, inc, y0, order, opts.t_max, opts.dt, &opts.kernel) {
        Ok(sim) => sim,
        Err(e) => {
            entry.error = Some(e.to_string());
            return entry;
        }
    };
    entry.positivity = sim.positivity;
    let last = sim.trajectory.last();
    let final_state = [last[0], last[1], last[2], last[3]];
    let distance = relative_distance(&final_state, target);
    entry.final_state = Some(final_state);
    entry.distance = Some(distance);
    entry.converged = distance < opts.epsilon;

    let lyap = |s: &[f64]| -> Result<f64, SeirError> {
        match eq.endemic {
            Some(p) => lyapunov_v1(params, inc, [p[0], p[1], p[2]], [s[0], s[1], s[2]]),
            None => lyapunov_v0(params, inc, [s[0], s[1], s[2]]),
        }
    };
    let values: Result<Vec<f64>, SeirError> = sim.trajectory.states().iter().map(|s| lyap(s)).collect();
    match values {
        Ok(v) => {
            entry.max_lyapunov_increase = v.windows(2).map(|w| w[1] - w[0]).reduce(f64::max);
            entry.final_lyapunov = v.last().copied();
        }
        Err(e) => entry.error = Some(format!("Lyapunov functional: {e}")),
    }
    entry
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(beta: f64) -> SeirParams {
        SeirParams::new(2.0, 0.1, beta, 0.2, 0.1, 1.0).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(SeirParams::new(2.0, 0.0, 0.01, 0.2, 0.1, 1.0).is_err());
        assert!(SeirParams::new(2.0, 0.1, -0.01, 0.2, 0.1, 1.0).is_err());
        assert!(SeirParams::new(2.0, 0.1, 0.01, 0.2, 0.1, 1.5).is_err());
        let p = SeirParams::new(2.0, 0.1, 0.03, 0.2, 0.1, 0.5).unwrap();
        let r = p.rates();
        assert!((r.d - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((r.m1 - (0.2f64.sqrt() + 0.1f64.sqrt())).abs() < 1e-15);
        let q = p.with_convention(RateConvention::Powered).rates();
        assert_eq!(q.d, 0.1);
    }

    #[test]
    fn r0_reference_values() {
        assert_eq!(r0(&reference(0.0), &IncidenceSpec::bilinear()).unwrap(), 0.0);
        assert!((r0(&reference(0.01), &IncidenceSpec::bilinear()).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!((r0(&reference(0.03), &IncidenceSpec::bilinear()).unwrap() - 2.0).abs() < 1e-14);
        let neg = IncidenceSpec::custom("negative", CustomIncidence::new(|s, i| -s * i));
        assert!(matches!(r0(&reference(0.03), &neg), Err(SeirError::NegativeR0(_))));
    }

    #[test]
    fn bilinear_endemic_closed_form() {
        let eq = equilibria(&reference(0.03), &IncidenceSpec::bilinear()).unwrap();
        let p = eq.endemic.unwrap();
        let e_star = (2.0 - 0.1 * 10.0) / 0.3;
        let i_star = 0.2 * e_star / 0.2;
        assert!((p[0] - 10.0).abs() < 1e-12);
        assert!((p[1] - e_star).abs() < 1e-12);
        assert!((p[2] - i_star).abs() < 1e-12);
        assert!((p[3] - 0.1 * i_star / 0.1).abs() < 1e-12);
        assert!(eq.residual_norm <= 1e-10);
        let none = equilibria(&reference(0.0), &IncidenceSpec::bilinear()).unwrap();
        assert!(none.endemic.is_none());
        assert_eq!(none.disease_free, [20.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn hypotheses_examples() {
        assert!(check_hypotheses(&IncidenceSpec::bilinear(), 100.0, 100.0, 21).unwrap().passed);
        let bd = IncidenceSpec::beddington_deangelis(0.1, 0.1, 0.1).unwrap();
        assert!(check_hypotheses(&bd, 100.0, 100.0, 21).unwrap().passed);
        let bad = check_hypotheses(&IncidenceSpec::si_squared(), 100.0, 100.0, 21).unwrap();
        assert!(!bad.passed);
        let v = bad.violation_of(Hypothesis::F1NonIncreasingInI).unwrap();
        assert!(v.value > 0.0 && v.s > 0.0);
        assert!(check_hypotheses(&IncidenceSpec::bilinear(), 1.0, 1.0, 5).is_err());
    }

    #[test]
    fn custom_incidence_uses_finite_differences() {
        let custom = IncidenceSpec::custom("bilinear_fd", CustomIncidence::new(|s, i| s * i));
        let bil = IncidenceSpec::bilinear();
        for (s, i) in [(3.0, 0.0), (3.0, 2.0), (0.0, 1.0)] {
            assert!((custom.df_di(s, i) - bil.df_di(s, i)).abs() < 1e-6);
            assert!((custom.df1_ds(s, i) - bil.df1_ds(s, i)).abs() < 1e-6);
            assert!((custom.df1_di(s, i) - bil.df1_di(s, i)).abs() < 1e-6);
        }
        assert!((r0(&reference(0.03), &custom).unwrap() - 2.0).abs() < 1e-6);
        // quadrature path of V0 agrees with the closed form
        let p = reference(0.01);
        let a = lyapunov_v0(&p, &custom, [35.0, 1.0, 2.0]).unwrap();
        let b = lyapunov_v0(&p, &bil, [35.0, 1.0, 2.0]).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn lyapunov_examples() {
        let p = reference(0.01);
        let inc = IncidenceSpec::bilinear();
        assert_eq!(lyapunov_v0(&p, &inc, [20.0, 0.0, 0.0]).unwrap(), 0.0);
        let want = 20.0 * (1.0 - 2f64.ln()) + 1.0 + 0.3 / 0.2;
        assert!((lyapunov_v0(&p, &inc, [40.0, 1.0, 1.0]).unwrap() - want).abs() < 1e-12);
        let p = reference(0.03);
        let e = equilibria(&p, &inc).unwrap().endemic.unwrap();
        let star = [e[0], e[1], e[2]];
        assert_eq!(lyapunov_v1(&p, &inc, star, star).unwrap(), 0.0);
        let v = lyapunov_v1(&p, &inc, star, [e[0], 2.0 * e[1], e[2]]).unwrap();
        assert!((v - e[1] * (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!(lyapunov_v1(&p, &inc, star, [e[0], 0.0, e[2]]).is_err());
    }

    #[test]
    fn g_entropy_values() {
        assert_eq!(g_entropy(1.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((g_entropy(e).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!((g_entropy(0.5).unwrap() - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert!(g_entropy(0.0).is_err());
    }

    #[test]
    fn dissipation_forms_agree() {
        let p = reference(0.03);
        let inc = IncidenceSpec::beddington_deangelis(0.01, 0.01, 0.01).unwrap();
        let eq = equilibria(&p, &inc).unwrap();
        let e = eq.endemic.unwrap();
        assert!(eq.residual_norm <= 1e-10);
        let d = v1_dissipation(&p, &inc, [e[0], e[1], e[2]], [e[0] * 1.3, e[1] * 0.7, e[2] * 1.1]).unwrap();
        assert!((d.bracket - d.g_terms).abs() < 1e-12);
        assert!((d.direct - d.bracket_form).abs() < 1e-12);
        assert!(d.direct < 0.0);
        let (direct, bound) = v0_dissipation(&reference(0.01), &inc, [25.0, 1.0, 2.0]).unwrap();
        assert!(direct <= bound + 1e-12 && bound <= 0.0);
    }

    #[test]
    fn disease_free_subspace_is_invariant() {
        let p = reference(0.03);
        let sim = simulate(&p, &IncidenceSpec::bilinear(), [5.0, 0.0, 0.0, 0.0], FractionalOrder::caputo(1.0).unwrap(), 50.0, 0.05, &KernelConfig::default())
            .unwrap();
        assert!(sim.positivity.is_none());
        assert!(sim.trajectory.states().iter().all(|s| s[1] == 0.0 && s[2] == 0.0));
        let s_end = sim.trajectory.last()[0];
        let exact = 20.0 - 15.0 * (-0.1f64 * 50.0).exp();
        assert!((s_end - exact).abs() < 1e-4);
        let err = simulate(&p, &IncidenceSpec::bilinear(), [5.0, 0.0, 0.0, 0.0], FractionalOrder::caputo(0.8).unwrap(), 50.0, 0.05, &KernelConfig::default());
        assert!(matches!(err, Err(SeirError::AlphaMismatch { .. })));
    }

    #[test]
    fn corpus_is_reproducible() {
        let a = seeded_initial_states(20.0, 5, 7);
        assert_eq!(a, seeded_initial_states(20.0, 5, 7));
        assert_ne!(a, seeded_initial_states(20.0, 5, 8));
        for s in &a {
            assert!((10.0..30.0).contains(&s[0]));
            assert!((0.1..2.0).contains(&s[1]) && (0.1..2.0).contains(&s[2]));
        }
    }
}
