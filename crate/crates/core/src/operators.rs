//! Fractional integrals and derivatives of uniformly sampled trajectories.
//!
//! All derivative discretisations interpolate u piecewise linearly, so the
//! derivative at node n is a lag convolution of the increments,
//!
//! D u(t_n) = Σ_{j<n} W_{n−1−j} (u_{j+1} − u_j),
//!
//! with W_m the kernel integrated over the m-th cell behind t_n (divided by
//! dt). The kernels are positive and decreasing, so W is increasing in
//! proximity to t_n. At α = 1 the derivative families switch to the
//! classical derivative; the kernel rate α/(1−α) is singular there.
//!
//! Every operator returns 0 at t = t0 for its integral part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mittag_leffler::{ml, MlError, MlParams};
use crate::quadrature::gauss_legendre;
use crate::special::{central_power_second_diff, forward_power_diff, gamma};
use crate::trajectory::{SampledTrajectory, TrajectoryError};

/// Operator family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(alias = "RL")]
    RlIntegral,
    #[serde(alias = "C")]
    Caputo,
    #[serde(alias = "CF")]
    CaputoFabrizio,
    #[serde(alias = "ABC")]
    Abc,
}

impl Family {
    pub fn is_derivative(self) -> bool {
        !matches!(self, Family::RlIntegral)
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::RlIntegral => "RL",
            Family::Caputo => "C",
            Family::CaputoFabrizio => "CF",
            Family::Abc => "ABC",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("fractional order must lie in (0, 1], got {0}")]
    InvalidOrder(f64),
    #[error("kernel normalisation must be positive and finite, got {0}")]
    InvalidNormalization(f64),
    #[error("{operator} needs at least {needed} samples, got {got}")]
    TooShort { operator: &'static str, needed: usize, got: usize },
    #[error("trajectory step {got} does not match the stencil step {expected}")]
    GridMismatch { expected: f64, got: f64 },
    #[error("trajectory of {got} samples exceeds the stencil capacity {capacity}")]
    CapacityExceeded { capacity: usize, got: usize },
    #[error("{0} is not a derivative family")]
    NotADerivative(Family),
    #[error("Atangana-Baleanu kernel evaluation failed: {0}")]
    Kernel(#[from] MlError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Order α ∈ (0, 1] together with the operator family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalOrder {
    alpha: f64,
    family: Family,
}

impl FractionalOrder {
    pub fn new(alpha: f64, family: Family) -> Result<Self, OperatorError> {
        check_alpha(alpha)?;
        Ok(Self { alpha, family })
    }

    pub fn caputo(alpha: f64) -> Result<Self, OperatorError> {
        Self::new(alpha, Family::Caputo)
    }

    pub fn caputo_fabrizio(alpha: f64) -> Result<Self, OperatorError> {
        Self::new(alpha, Family::CaputoFabrizio)
    }

    pub fn abc(alpha: f64) -> Result<Self, OperatorError> {
        Self::new(alpha, Family::Abc)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_classical(&self) -> bool {
        self.alpha == 1.0
    }
}

fn check_alpha(alpha: f64) -> Result<(), OperatorError> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(OperatorError::InvalidOrder(alpha))
    }
}

/// Kernel settings shared by the CF and ABC operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// B(α) for 0 < α < 1. The classical branch at α = 1 uses B(1) = 1.
    pub normalization_b: f64,
    /// Relative tolerance when matching grids and checking uniform spacing.
    pub grid_tolerance: f64,
    /// Gauss–Legendre points per cell for the Mittag-Leffler kernel.
    pub abc_quadrature_order: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { normalization_b: 1.0, grid_tolerance: 1e-8, abc_quadrature_order: 4 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), OperatorError> {
        if !(self.normalization_b.is_finite() && self.normalization_b > 0.0) {
            return Err(OperatorError::InvalidNormalization(self.normalization_b));
        }
        Ok(())
    }

    pub fn normalization(&self, alpha: f64) -> f64 {
        if alpha == 1.0 {
            1.0
        } else {
            self.normalization_b
        }
    }
}

#[derive(Debug, Clone)]
enum Scheme {
    Classical,
    Lag(Vec<f64>),
}

/// Precomputed derivative weights for one (order, kernel, dt, length).
#[derive(Debug, Clone)]
pub struct DerivativeStencil {
    order: FractionalOrder,
    dt: f64,
    capacity: usize,
    grid_tolerance: f64,
    scheme: Scheme,
}

impl DerivativeStencil {
    /// Weights for trajectories of up to `len` samples with step `dt`.
    pub fn new(order: FractionalOrder, cfg: &KernelConfig, dt: f64, len: usize) -> Result<Self, OperatorError> {
        cfg.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TrajectoryError::InvalidStep(dt).into());
        }
        let alpha = order.alpha();
        let lags = len.saturating_sub(1);
        let scheme = if order.is_classical() {
            if !order.family().is_derivative() {
                return Err(OperatorError::NotADerivative(order.family()));
            }
            Scheme::Classical
        } else {
            Scheme::Lag(match order.family() {
                Family::Caputo => caputo_weights(alpha, dt, lags),
                Family::CaputoFabrizio => cf_weights(alpha, cfg.normalization(alpha), dt, lags),
                Family::Abc => abc_weights(alpha, cfg.normalization(alpha), dt, lags, cfg.abc_quadrature_order)?,
                Family::RlIntegral => return Err(OperatorError::NotADerivative(Family::RlIntegral)),
            })
        };
        Ok(Self { order, dt, capacity: len, grid_tolerance: cfg.grid_tolerance, scheme })
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    /// Lag weights W_0, W_1, …; empty for the classical branch.
    pub fn weights(&self) -> &[f64] {
        match &self.scheme {
            Scheme::Classical => &[],
            Scheme::Lag(w) => w,
        }
    }

    pub fn apply(&self, u: &SampledTrajectory) -> Result<SampledTrajectory, OperatorError> {
        if (u.dt() - self.dt).abs() > self.grid_tolerance * self.dt {
            return Err(OperatorError::GridMismatch { expected: self.dt, got: u.dt() });
        }
        if u.len() > self.capacity {
            return Err(OperatorError::CapacityExceeded { capacity: self.capacity, got: u.len() });
        }
        let values = match &self.scheme {
            Scheme::Classical => {
                if u.len() < 3 {
                    return Err(OperatorError::TooShort { operator: "classical derivative", needed: 3, got: u.len() });
                }
                classical_derivative(u.values(), u.dt())
            }
            Scheme::Lag(w) => lag_convolution(w, u.values()),
        };
        Ok(u.with_values(values))
    }
}

fn caputo_weights(alpha: f64, dt: f64, lags: usize) -> Vec<f64> {
    let scale = dt.powf(-alpha) / gamma(2.0 - alpha);
    (0..lags).map(|m| scale * forward_power_diff(m as f64, 1.0 - alpha)).collect()
}

fn cf_weights(alpha: f64, b: f64, dt: f64, lags: usize) -> Vec<f64> {
    let rate = alpha / (1.0 - alpha);
    let prefactor = 0.5 * b * (2.0 - alpha) / (1.0 - alpha);
    let cell = -(-rate * dt).exp_m1() / (rate * dt);
    (0..lags).map(|m| prefactor * cell * (-rate * m as f64 * dt).exp()).collect()
}

fn abc_weights(alpha: f64, b: f64, dt: f64, lags: usize, order: usize) -> Result<Vec<f64>, OperatorError> {
    let rate = alpha / (1.0 - alpha);
    let prefactor = b / (1.0 - alpha);
    let params = MlParams::new(alpha, 1.0)?;
    let (nodes, weights) = gauss_legendre(order.max(1));
    (0..lags)
        .into_par_iter()
        .map(|m| {
            let mut acc = 0.0;
            for (x, w) in nodes.iter().zip(&weights) {
                let s = dt * (m as f64 + 0.5 * (1.0 + x));
                acc += w * ml(&params, -rate * s.powf(alpha))?;
            }
            Ok(prefactor * 0.5 * acc)
        })
        .collect()
}

fn lag_convolution(weights: &[f64], u: &[f64]) -> Vec<f64> {
    let increments: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![0.0; u.len()];
    for n in 1..u.len() {
        out[n] = increments[..n]
            .iter()
            .rev()
            .zip(weights)
            .map(|(du, w)| du * w)
            .sum();
    }
    out
}

fn classical_derivative(u: &[f64], dt: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for k in 1..n - 1 {
        out[k] = (u[k + 1] - u[k - 1]) / (2.0 * dt);
    }
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dt);
    out
}

fn running_trapezoid(f: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for k in 1..f.len() {
        out[k] = out[k - 1] + 0.5 * dt * (f[k - 1] + f[k]);
    }
    out
}

/// Riemann–Liouville integral by product trapezoidal quadrature: the weight
/// (t − x)^{α−1} is integrated exactly against the piecewise-linear
/// interpolant of `u`.
pub fn rl_integral(u: &SampledTrajectory, alpha: f64) -> Result<SampledTrajectory, OperatorError> {
    check_alpha(alpha)?;
    let v = u.values();
    let n_nodes = v.len();
    let scale = u.dt().powf(alpha) / gamma(alpha + 2.0);
    let p = alpha + 1.0;
    let interior: Vec<f64> = (0..n_nodes).map(|k| if k == 0 { 0.0 } else { central_power_second_diff(k as f64, p) }).collect();
    let mut out = vec![0.0; n_nodes];
    for n in 1..n_nodes {
        let nf = n as f64;
        let first = (nf - 1.0).powf(p) - (nf - 1.0 - alpha) * nf.powf(alpha);
        let mut acc = first * v[0] + v[n];
        for j in 1..n {
            acc += interior[n - j] * v[j];
        }
        out[n] = scale * acc;
    }
    Ok(u.with_values(out))
}

/// Caputo derivative by the L1 scheme.
pub fn caputo_deriv(u: &SampledTrajectory, alpha: f64) -> Result<SampledTrajectory, OperatorError> {
    if u.len() < 3 {
        return Err(OperatorError::TooShort { operator: "Caputo derivative", needed: 3, got: u.len() });
    }
    let order = FractionalOrder::caputo(alpha)?;
    DerivativeStencil::new(order, &KernelConfig::default(), u.dt(), u.len())?.apply(u)
}

/// Caputo–Fabrizio derivative with the exponential kernel integrated exactly
/// on each cell.
pub fn cf_deriv(u: &SampledTrajectory, alpha: f64, cfg: &KernelConfig) -> Result<SampledTrajectory, OperatorError> {
    let order = FractionalOrder::caputo_fabrizio(alpha)?;
    DerivativeStencil::new(order, cfg, u.dt(), u.len())?.apply(u)
}

/// Atangana–Baleanu–Caputo derivative; the Mittag-Leffler kernel is
/// integrated per cell by Gauss–Legendre quadrature.
pub fn abc_deriv(u: &SampledTrajectory, alpha: f64, cfg: &KernelConfig) -> Result<SampledTrajectory, OperatorError> {
    let order = FractionalOrder::abc(alpha)?;
    DerivativeStencil::new(order, cfg, u.dt(), u.len())?.apply(u)
}

/// Caputo–Fabrizio integral
/// 2(1−α)/(B(2−α)) f(t) + 2α/(B(2−α)) ∫_{t0}^t f.
/// At α = 1 this is the plain running integral, the inverse of the
/// classical derivative branch.
pub fn cf_integral(f: &SampledTrajectory, alpha: f64, cfg: &KernelConfig) -> Result<SampledTrajectory, OperatorError> {
    check_alpha(alpha)?;
    cfg.validate()?;
    let running = running_trapezoid(f.values(), f.dt());
    if alpha == 1.0 {
        return Ok(f.with_values(running));
    }
    let b = cfg.normalization(alpha);
    let local = 2.0 * (1.0 - alpha) / (b * (2.0 - alpha));
    let memory = 2.0 * alpha / (b * (2.0 - alpha));
    let values = f.values().iter().zip(&running).map(|(v, r)| local * v + memory * r).collect();
    Ok(f.with_values(values))
}

/// Atangana–Baleanu integral (1−α)/B f(t) + α/B · RL-integral of order α.
pub fn ab_integral(f: &SampledTrajectory, alpha: f64, cfg: &KernelConfig) -> Result<SampledTrajectory, OperatorError> {
    check_alpha(alpha)?;
    cfg.validate()?;
    let b = cfg.normalization(alpha);
    let rl = rl_integral(f, alpha)?;
    let values = f
        .values()
        .iter()
        .zip(rl.values())
        .map(|(v, i)| (1.0 - alpha) / b * v + alpha / b * i)
        .collect();
    Ok(f.with_values(values))
}

/// Derivative of the given family.
pub fn derivative(u: &SampledTrajectory, order: FractionalOrder, cfg: &KernelConfig) -> Result<SampledTrajectory, OperatorError> {
    match order.family() {
        Family::Caputo => caputo_deriv(u, order.alpha()),
        Family::CaputoFabrizio => cf_deriv(u, order.alpha(), cfg),
        Family::Abc => abc_deriv(u, order.alpha(), cfg),
        Family::RlIntegral => Err(OperatorError::NotADerivative(Family::RlIntegral)),
    }
}

/// Integral operator associated with the family (RL for Caputo).
pub fn integral(f: &SampledTrajectory, order: FractionalOrder, cfg: &KernelConfig) -> Result<SampledTrajectory, OperatorError> {
    match order.family() {
        Family::RlIntegral | Family::Caputo => rl_integral(f, order.alpha()),
        Family::CaputoFabrizio => cf_integral(f, order.alpha(), cfg),
        Family::Abc => ab_integral(f, order.alpha(), cfg),
    }
}
