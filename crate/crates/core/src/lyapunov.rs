//! Lyapunov building blocks Ψ and numerical checks of the estimate
//!
//! D^α Ψ(u(t)) ≤ Ψ'(u(t)) · D^α u(t)
//!
//! along sampled trajectories. Ψ(u) = ∫_{u*}^u (g(s) − g(u*))/g(s) ds for a
//! positive increasing generator g; g(s) = s gives the Volterra function and
//! the quadratic candidate u² is handled separately.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{DerivativeStencil, Family, FractionalOrder, KernelConfig, OperatorError};
use crate::quadrature::{integrate, AdaptiveOptions, QuadratureError};
use crate::trajectory::{SampledTrajectory, TrajectoryError};

/// Tolerance of the adaptive quadrature behind Ψ for a general generator.
pub const PSI_QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Number of points used to check a generator on a value range.
pub const GENERATOR_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("reference value u* must be positive and finite, got {0}")]
    InvalidReference(f64),
    #[error("candidate requires positive arguments, got {value}{}", index.map(|i| format!(" at node {i}")).unwrap_or_default())]
    NonPositive { value: f64, index: Option<usize> },
    #[error("generator {name} is not positive at s = {s} (g = {value})")]
    GeneratorNotPositive { name: String, s: f64, value: f64 },
    #[error("generator {name} is not strictly increasing near s = {s}")]
    GeneratorNotIncreasing { name: String, s: f64 },
    #[error("unknown generator '{0}'")]
    UnknownGenerator(String),
    #[error("{0} is not a derivative family")]
    NotADerivative(Family),
    #[error("quadrature of Ψ failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Named positive, strictly increasing function g used to build Ψ.
#[derive(Clone)]
pub struct Generator {
    name: String,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Generator").field(&self.name).finish()
    }
}

impl Generator {
    pub fn new(name: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), g: Arc::new(g) }
    }

    /// Built-in generators: `linear` (s), `square` (s²), `cubic` (s³),
    /// `sqrt` (√s) and `exp` (eˢ).
    pub fn named(name: &str) -> Result<Self, LyapunovError> {
        let g: fn(f64) -> f64 = match name {
            "linear" => |s| s,
            "square" => |s| s * s,
            "cubic" => |s| s * s * s,
            "sqrt" => f64::sqrt,
            "exp" => f64::exp,
            _ => return Err(LyapunovError::UnknownGenerator(name.to_string())),
        };
        Ok(Self::new(name, g))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.g)(s)
    }

    /// Checks positivity and strict increase on an evenly spaced sample of
    /// [lo, hi].
    pub fn check_on(&self, lo: f64, hi: f64) -> Result<(), LyapunovError> {
        let n = GENERATOR_SAMPLES;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..n {
            let s = if hi > lo { lo + (hi - lo) * k as f64 / (n - 1) as f64 } else { lo };
            let v = self.eval(s);
            if !(v.is_finite() && v > 0.0) {
                return Err(LyapunovError::GeneratorNotPositive { name: self.name.clone(), s, value: v });
            }
            if hi > lo && v <= prev {
                return Err(LyapunovError::GeneratorNotIncreasing { name: self.name.clone(), s });
            }
            prev = v;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CandidateKind {
    Quadratic,
    Volterra,
    PsiGeneral,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateKind::Quadratic => "QUADRATIC",
            CandidateKind::Volterra => "VOLTERRA",
            CandidateKind::PsiGeneral => "PSI_GENERAL",
        })
    }
}

/// A Lyapunov building block Ψ.
#[derive(Debug, Clone)]
pub enum Candidate {
    Quadratic,
    Volterra { u_star: f64 },
    General { u_star: f64, generator: Generator },
}

impl Candidate {
    pub fn volterra(u_star: f64) -> Result<Self, LyapunovError> {
        check_reference(u_star)?;
        Ok(Candidate::Volterra { u_star })
    }

    pub fn general(u_star: f64, generator: Generator) -> Result<Self, LyapunovError> {
        check_reference(u_star)?;
        Ok(Candidate::General { u_star, generator })
    }

    pub fn kind(&self) -> CandidateKind {
        match self {
            Candidate::Quadratic => CandidateKind::Quadratic,
            Candidate::Volterra { .. } => CandidateKind::Volterra,
            Candidate::General { .. } => CandidateKind::PsiGeneral,
        }
    }

    pub fn u_star(&self) -> Option<f64> {
        match self {
            Candidate::Quadratic => None,
            Candidate::Volterra { u_star } | Candidate::General { u_star, .. } => Some(*u_star),
        }
    }

    fn requires_positive(&self) -> bool {
        !matches!(self, Candidate::Quadratic)
    }
}

fn check_reference(u_star: f64) -> Result<(), LyapunovError> {
    if u_star.is_finite() && u_star > 0.0 {
        Ok(())
    } else {
        Err(LyapunovError::InvalidReference(u_star))
    }
}

fn check_positive(c: &Candidate, u: f64) -> Result<(), LyapunovError> {
    if c.requires_positive() && !(u > 0.0) {
        return Err(LyapunovError::NonPositive { value: u, index: None });
    }
    Ok(())
}

/// Ψ(u).
pub fn psi(c: &Candidate, u: f64) -> Result<f64, LyapunovError> {
    check_positive(c, u)?;
    match c {
        Candidate::Quadratic => Ok(u * u),
        Candidate::Volterra { u_star } => Ok(u - u_star - u_star * (u / u_star).ln()),
        Candidate::General { u_star, generator } => {
            let g_star = generator.eval(*u_star);
            let bad = Cell::new(None);
            let r = integrate(
                |s| {
                    let g = generator.eval(s);
                    if !(g > 0.0) && bad.get().is_none() {
                        bad.set(Some((s, g)));
                    }
                    1.0 - g_star / g
                },
                *u_star,
                u,
                &AdaptiveOptions::with_tolerance(PSI_QUADRATURE_TOLERANCE),
            );
            if let Some((s, value)) = bad.get() {
                return Err(LyapunovError::GeneratorNotPositive { name: generator.name.clone(), s, value });
            }
            Ok(r?.value)
        }
    }
}

/// dΨ/du.
pub fn psi_slope(c: &Candidate, u: f64) -> Result<f64, LyapunovError> {
    check_positive(c, u)?;
    match c {
        Candidate::Quadratic => Ok(2.0 * u),
        Candidate::Volterra { u_star } => Ok(1.0 - u_star / u),
        Candidate::General { u_star, generator } => {
            let g = generator.eval(u);
            if !(g > 0.0) {
                return Err(LyapunovError::GeneratorNotPositive { name: generator.name.clone(), s: u, value: g });
            }
            Ok(1.0 - generator.eval(*u_star) / g)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Holds,
    HoldsWithinTolerance,
    Violated,
}

impl Verdict {
    pub fn classify(max_violation: f64, tolerance: f64) -> Self {
        if max_violation <= 0.0 {
            Verdict::Holds
        } else if max_violation <= tolerance {
            Verdict::HoldsWithinTolerance
        } else {
            Verdict::Violated
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "HOLDS",
            Verdict::HoldsWithinTolerance => "HOLDS_WITHIN_TOLERANCE",
            Verdict::Violated => "VIOLATED",
        })
    }
}

/// Pointwise sides of D^α Ψ(u) ≤ Ψ'(u) D^α u.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub family: Family,
    pub alpha: f64,
    pub candidate: CandidateKind,
    pub lhs: SampledTrajectory,
    pub rhs: SampledTrajectory,
    /// max over nodes after t0 of lhs − rhs.
    pub max_violation: f64,
    pub worst_index: usize,
    pub tolerance_used: f64,
    pub verdict: Verdict,
}

impl EstimateReport {
    /// True when both sides vanish identically, e.g. for constant u.
    pub fn is_degenerate(&self) -> bool {
        self.lhs.values().iter().chain(self.rhs.values()).all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Tolerance is `tolerance_factor · dt`.
    pub tolerance_factor: f64,
    /// Compare rhs ≤ lhs instead; used to self-test the harness.
    pub swap_sides: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { tolerance_factor: 10.0, swap_sides: false }
    }
}

/// Checks the estimate along `u` with the default options.
pub fn verify_estimate(
    u: &SampledTrajectory,
    order: FractionalOrder,
    c: &Candidate,
    kcfg: &KernelConfig,
) -> Result<EstimateReport, LyapunovError> {
    verify_estimate_with(u, order, c, kcfg, &VerifyOptions::default())
}

pub fn verify_estimate_with(
    u: &SampledTrajectory,
    order: FractionalOrder,
    c: &Candidate,
    kcfg: &KernelConfig,
    opts: &VerifyOptions,
) -> Result<EstimateReport, LyapunovError> {
    if !order.family().is_derivative() {
        return Err(LyapunovError::NotADerivative(order.family()));
    }
    if c.requires_positive() {
        if let Some((index, &value)) = u.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(LyapunovError::NonPositive { value, index: Some(index) });
        }
    }
    if let Candidate::General { u_star, generator } = c {
        let lo = u.values().iter().copied().fold(*u_star, f64::min);
        let hi = u.values().iter().copied().fold(*u_star, f64::max);
        generator.check_on(lo, hi)?;
    }
    let composed = u.try_map(|v| psi(c, v))??;
    let slopes = u.values().iter().map(|&v| psi_slope(c, v)).collect::<Result<Vec<_>, _>>()?;

    let stencil = DerivativeStencil::new(order, kcfg, u.dt(), u.len())?;
    let lhs = stencil.apply(&composed)?;
    let du = stencil.apply(u)?;
    let rhs = du.map_values(|k, v| slopes[k] * v);

    let (upper, lower) = if opts.swap_sides { (&rhs, &lhs) } else { (&lhs, &rhs) };
    let (worst_index, max_violation) = upper
        .values()
        .iter()
        .zip(lower.values())
        .enumerate()
        .skip(1)
        .map(|(k, (a, b))| (k, a - b))
        .fold((1, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let tolerance_used = opts.tolerance_factor * u.dt();
    Ok(EstimateReport {
        family: order.family(),
        alpha: order.alpha(),
        candidate: c.kind(),
        lhs,
        rhs,
        max_violation,
        worst_index,
        tolerance_used,
        verdict: Verdict::classify(max_violation, tolerance_used),
    })
}

/// One entry of a batch verification.
#[derive(Debug, Clone)]
pub struct ScanItem {
    pub u: SampledTrajectory,
    pub order: FractionalOrder,
    pub candidate: Candidate,
}

/// Per-item results of [`margin_scan`], in input order.
#[derive(Debug, Clone)]
pub struct MarginScan {
    pub results: Vec<Result<EstimateReport, LyapunovError>>,
}

impl MarginScan {
    pub fn reports(&self) -> impl Iterator<Item = &EstimateReport> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn errors(&self) -> impl Iterator<Item = (usize, &LyapunovError)> {
        self.results.iter().enumerate().filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
    }

    /// Worst verdict among successful reports.
    pub fn worst_verdict(&self) -> Option<Verdict> {
        self.reports().map(|r| r.verdict).max()
    }

    /// Largest max_violation among reports whose sides are not identically 0.
    pub fn worst_margin(&self) -> Option<f64> {
        self.reports()
            .filter(|r| !r.is_degenerate())
            .map(|r| r.max_violation)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }
}

/// Verifies every item independently; failures are reported per item.
pub fn margin_scan(items: &[ScanItem], kcfg: &KernelConfig, opts: &VerifyOptions) -> MarginScan {
    let results = items
        .par_iter()
        .map(|it| verify_estimate_with(&it.u, it.order, &it.candidate, kcfg, opts))
        .collect();
    MarginScan { results }
}
