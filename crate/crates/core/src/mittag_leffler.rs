//! Mittag-Leffler functions.
//!
//! Two-parameter function E_{α,β}(z) = Σ z^j / Γ(αj + β) and the
//! three-parameter (Prabhakar) generalisation
//! E^ρ_{α,β}(z) = Σ (ρ)_j z^j / (j! Γ(αj + β)).
//!
//! The power series is used whenever its cancellation error is below the
//! requested tolerance. On the negative real axis the alternating series
//! loses roughly exp(|z|^{1/α}) · ε, so for larger |z| the value is taken
//! from the Laplace-inversion integral collapsed onto the branch cut
//!
//! E^ρ_{α,β}(−λ) = −(1/π) ∫₀^∞ e^{−r} Im[ s^{αρ−β} (s^α + λ)^{−ρ} ]_{s = r e^{iπ}} dr,
//!
//! valid for 0 < α < 1 and αρ − β > −1. For α = 1 Kummer's transformation
//! turns the alternating series into one with (mostly) one-signed terms.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::{integrate_adaptive, AdaptiveOptions, QuadratureError};
use crate::special::{gamma, gamma_ratio, CompensatedSum};

pub const DEFAULT_TOLERANCE: f64 = 1e-13;
pub const TERM_BUDGET: usize = 10_000;

/// Upper limit of the branch-cut integral; e^{−60} is below every tolerance
/// this module supports.
const CUT_INTEGRAL_RMAX: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("invalid Mittag-Leffler parameters: alpha={alpha}, beta={beta}, rho={rho}")]
    InvalidParams { alpha: f64, beta: f64, rho: f64 },
    #[error("non-finite Mittag-Leffler argument {0}")]
    NonFiniteArgument(f64),
    #[error("Mittag-Leffler series at z={z} did not converge within {terms} terms")]
    NotConverged { z: f64, terms: usize },
    #[error("Mittag-Leffler evaluation at z={z} is outside the supported domain: {reason}")]
    Unsupported { z: f64, reason: &'static str },
    #[error("Mittag-Leffler branch-cut integral failed at z={z}: {source}")]
    Quadrature {
        z: f64,
        #[source]
        source: QuadratureError,
    },
}

/// Parameters (α, β, ρ) of E^ρ_{α,β}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

impl MlParams {
    /// Two-parameter function (ρ = 1).
    pub fn new(alpha: f64, beta: f64) -> Result<Self, MlError> {
        Self::prabhakar(alpha, beta, 1.0)
    }

    pub fn prabhakar(alpha: f64, beta: f64, rho: f64) -> Result<Self, MlError> {
        let p = Self { alpha, beta, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MlError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.alpha) && ok(self.beta) && ok(self.rho) {
            Ok(())
        } else {
            Err(MlError::InvalidParams { alpha: self.alpha, beta: self.beta, rho: self.rho })
        }
    }
}

struct SeriesSum {
    value: f64,
    /// Estimated absolute round-off from cancellation between terms.
    roundoff: f64,
}

impl SeriesSum {
    fn accurate(&self, tol: f64) -> bool {
        self.roundoff <= tol * self.value.abs().max(1.0)
    }
}

/// E^ρ_{α,β}(z) to absolute tolerance [`DEFAULT_TOLERANCE`].
pub fn ml(params: &MlParams, z: f64) -> Result<f64, MlError> {
    ml_with_tolerance(params, z, DEFAULT_TOLERANCE)
}

/// E^ρ_{α,β}(z) to the given absolute tolerance (relative for |E| > 1).
pub fn ml_with_tolerance(params: &MlParams, z: f64, tol: f64) -> Result<f64, MlError> {
    params.validate()?;
    if !z.is_finite() {
        return Err(MlError::NonFiniteArgument(z));
    }
    if z == 0.0 {
        return Ok(1.0 / gamma(params.beta));
    }
    let MlParams { alpha, beta, rho } = *params;
    let series = prabhakar_series(params, z);
    match &series {
        Ok(s) if s.accurate(tol) => return Ok(s.value),
        _ => {}
    }
    if z < 0.0 {
        let lambda = -z;
        if alpha < 1.0 && alpha * rho - beta > -1.0 {
            return branch_cut_complex(alpha, beta, rho, lambda, tol);
        }
        if alpha < 1.0 && rho == 1.0 {
            return two_parameter_by_recurrence(alpha, beta, lambda, tol);
        }
        if alpha == 1.0 {
            return kummer_unit_alpha(beta, rho, z, tol);
        }
        return Err(MlError::Unsupported { z, reason: "large negative argument with alpha > 1" });
    }
    match series {
        Ok(s) => Err(MlError::Unsupported {
            z,
            reason: if s.value.is_finite() { "series round-off exceeds tolerance" } else { "overflow" },
        }),
        Err(e) => Err(e),
    }
}

fn prabhakar_series(p: &MlParams, z: f64) -> Result<SeriesSum, MlError> {
    let MlParams { alpha, beta, rho } = *p;
    let mut term = 1.0 / gamma(beta);
    let mut sum = CompensatedSum::new();
    sum.add(term);
    let mut magnitude = term.abs();
    let mut previous = term.abs();
    for j in 1..=TERM_BUDGET {
        let jf = j as f64;
        term *= z * (rho + jf - 1.0) / jf * gamma_ratio(alpha * (jf - 1.0) + beta, alpha * jf + beta);
        if !term.is_finite() {
            return Err(MlError::Unsupported { z, reason: "series term overflow" });
        }
        sum.add(term);
        magnitude += term.abs();
        let s = sum.value();
        if term == 0.0 || (term.abs() <= f64::EPSILON * s.abs() && term.abs() <= previous) {
            return Ok(SeriesSum { value: s, roundoff: 8.0 * f64::EPSILON * magnitude });
        }
        previous = term.abs();
    }
    Err(MlError::NotConverged { z, terms: TERM_BUDGET })
}

/// Points delimiting the branch-cut integral in the substituted variable
/// w (r = w^m): the origin, the near-pole r = λ^{1/α}, and the cut-off.
fn cut_breakpoints(alpha: f64, lambda: f64, m: f64) -> Vec<f64> {
    let to_w = |r: f64| r.powf(1.0 / m);
    let mut pts = vec![0.0];
    let peak = lambda.powf(1.0 / alpha);
    for r in [peak, 1.0] {
        if r > 0.0 && r < CUT_INTEGRAL_RMAX {
            pts.push(to_w(r));
        }
    }
    pts.push(to_w(CUT_INTEGRAL_RMAX));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn branch_cut_complex(alpha: f64, beta: f64, rho: f64, lambda: f64, tol: f64) -> Result<f64, MlError> {
    let p = alpha * rho - beta;
    // r = w^m absorbs the r^p endpoint singularity when p < 0
    let m = if p < 0.0 { 1.0 / (1.0 + p) } else { 1.0 };
    let phase_p = Complex64::from_polar(1.0, PI * p);
    let phase_a = Complex64::from_polar(1.0, PI * alpha);
    let integer_rho = rho.fract() == 0.0 && rho <= 8.0;
    let integrand = |w: f64| {
        let r = w.powf(m);
        let weight = if p < 0.0 { m } else { r.powf(p) };
        let base = phase_a * r.powf(alpha) + lambda;
        let power = if integer_rho { base.powi(-(rho as i32)) } else { base.powf(-rho) };
        -(-r).exp() * weight * (phase_p * power).im / PI
    };
    let pts = cut_breakpoints(alpha, lambda, m);
    let opts = AdaptiveOptions { abs_tol: 0.1 * tol, rel_tol: 0.1 * tol, max_segments: 4000 };
    integrate_adaptive(integrand, &pts, &opts)
        .map(|r| r.value)
        .map_err(|source| MlError::Quadrature { z: -lambda, source })
}

/// Real form of the branch-cut integral for ρ = 1:
/// E_{α,β}(−λ) = (1/π) ∫ e^{−r} r^{α−β} [r^α sin(πβ) − λ sin(π(α−β))] / (r^{2α} + 2λ r^α cos(πα) + λ²) dr.
fn branch_cut_real(alpha: f64, beta: f64, lambda: f64, tol: f64) -> Result<f64, MlError> {
    let p = alpha - beta;
    let m = if p < 0.0 { 1.0 / (1.0 + p) } else { 1.0 };
    let (sb, sab, ca) = ((PI * beta).sin(), (PI * p).sin(), (PI * alpha).cos());
    let integrand = |w: f64| {
        let r = w.powf(m);
        let weight = if p < 0.0 { m } else { r.powf(p) };
        let ra = r.powf(alpha);
        let num = ra * sb - lambda * sab;
        let den = ra * ra + 2.0 * lambda * ra * ca + lambda * lambda;
        (-r).exp() * weight * num / den / PI
    };
    let pts = cut_breakpoints(alpha, lambda, m);
    let opts = AdaptiveOptions { abs_tol: 0.1 * tol, rel_tol: 0.1 * tol, max_segments: 4000 };
    integrate_adaptive(integrand, &pts, &opts)
        .map(|r| r.value)
        .map_err(|source| MlError::Quadrature { z: -lambda, source })
}

/// E_{α,β}(z) = (E_{α,β−α}(z) − 1/Γ(β−α)) / z, applied until β < 1 + α.
fn two_parameter_by_recurrence(alpha: f64, beta: f64, lambda: f64, tol: f64) -> Result<f64, MlError> {
    let z = -lambda;
    let mut betas = vec![beta];
    while *betas.last().unwrap() >= 1.0 + alpha {
        let b = betas.last().unwrap() - alpha;
        betas.push(b);
    }
    let lowest = *betas.last().unwrap();
    let mut value = mittag_leffler_with_tolerance(alpha, lowest, z, tol)?;
    for b in betas.iter().rev().skip(1) {
        value = (value - 1.0 / gamma(b - alpha)) / z;
    }
    Ok(value)
}

/// α = 1: E^ρ_{1,β}(z) = e^z Σ (β−ρ)_j (−z)^j / (j! Γ(β+j)).
fn kummer_unit_alpha(beta: f64, rho: f64, z: f64, tol: f64) -> Result<f64, MlError> {
    if z < -600.0 {
        return Err(MlError::Unsupported { z, reason: "argument below the Kummer-transform range" });
    }
    let x = -z;
    let mut term = 1.0 / gamma(beta);
    let mut sum = CompensatedSum::new();
    sum.add(term);
    let mut magnitude = term.abs();
    let mut previous = term.abs();
    for j in 1..=TERM_BUDGET {
        let jf = j as f64;
        term *= (beta - rho + jf - 1.0) * x / (jf * (beta + jf - 1.0));
        sum.add(term);
        magnitude += term.abs();
        let s = sum.value();
        if term == 0.0 || (term.abs() <= f64::EPSILON * s.abs() && term.abs() <= previous) {
            let scale = z.exp();
            let value = scale * s;
            let roundoff = 8.0 * f64::EPSILON * magnitude * scale;
            if roundoff <= tol * value.abs().max(1.0) {
                return Ok(value);
            }
            return Err(MlError::Unsupported { z, reason: "Kummer series round-off exceeds tolerance" });
        }
        previous = term.abs();
    }
    Err(MlError::NotConverged { z, terms: TERM_BUDGET })
}

/// Two-parameter E_{α,β}(z) through its own series (terms z^j / Γ(αj+β)
/// formed directly) and the real branch-cut integral.
pub fn mittag_leffler(alpha: f64, beta: f64, z: f64) -> Result<f64, MlError> {
    mittag_leffler_with_tolerance(alpha, beta, z, DEFAULT_TOLERANCE)
}

pub fn mittag_leffler_with_tolerance(alpha: f64, beta: f64, z: f64, tol: f64) -> Result<f64, MlError> {
    MlParams::new(alpha, beta)?;
    if !z.is_finite() {
        return Err(MlError::NonFiniteArgument(z));
    }
    if z == 0.0 {
        return Ok(1.0 / gamma(beta));
    }
    let series = two_parameter_series(alpha, beta, z);
    if let Ok(s) = &series {
        if s.accurate(tol) {
            return Ok(s.value);
        }
    }
    if z < 0.0 {
        let lambda = -z;
        if alpha < 1.0 && alpha - beta > -1.0 {
            return branch_cut_real(alpha, beta, lambda, tol);
        }
        if alpha < 1.0 {
            return two_parameter_by_recurrence(alpha, beta, lambda, tol);
        }
        if alpha == 1.0 {
            return kummer_unit_alpha(beta, 1.0, z, tol);
        }
        return Err(MlError::Unsupported { z, reason: "large negative argument with alpha > 1" });
    }
    match series {
        Ok(_) => Err(MlError::Unsupported { z, reason: "series round-off exceeds tolerance" }),
        Err(e) => Err(e),
    }
}

fn two_parameter_series(alpha: f64, beta: f64, z: f64) -> Result<SeriesSum, MlError> {
    let ln_abs_z = z.abs().ln();
    let mut sum = CompensatedSum::new();
    let mut magnitude = 0.0;
    let mut previous = f64::INFINITY;
    for j in 0..=TERM_BUDGET {
        let arg = alpha * j as f64 + beta;
        let sign = if z < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
        let direct = z.abs().powi(j as i32) / gamma(arg);
        let term = if arg < 160.0 && direct.is_finite() {
            sign * direct
        } else {
            sign * (j as f64 * ln_abs_z - crate::special::ln_gamma(arg)).exp()
        };
        if !term.is_finite() {
            return Err(MlError::Unsupported { z, reason: "series term overflow" });
        }
        sum.add(term);
        magnitude += term.abs();
        let s = sum.value();
        if j > 0 && (term == 0.0 || (term.abs() <= f64::EPSILON * s.abs() && term.abs() <= previous)) {
            return Ok(SeriesSum { value: s, roundoff: 8.0 * f64::EPSILON * magnitude });
        }
        previous = term.abs();
    }
    Err(MlError::NotConverged { z, terms: TERM_BUDGET })
}

/// d/dz E_{α,β}(z) = E²_{α,α+β}(z). `params.rho` must be 1.
pub fn ml_derivative(params: &MlParams, z: f64) -> Result<f64, MlError> {
    params.validate()?;
    if params.rho != 1.0 {
        return Err(MlError::InvalidParams { alpha: params.alpha, beta: params.beta, rho: params.rho });
    }
    let shifted = MlParams::prabhakar(params.alpha, params.alpha + params.beta, 2.0)?;
    ml(&shifted, z)
}
