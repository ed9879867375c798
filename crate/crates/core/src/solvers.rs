//! Initial-value solvers for D^α y = f(t, y) in each derivative family.
//!
//! * Caputo: fractional Adams–Bashforth–Moulton (PECE) with full memory.
//! * Caputo–Fabrizio: the equation is rewritten with the CF integral as
//!   y = y0 + a1 (f − f0) + a2 ∫f and the running integral is advanced with
//!   two-step Adams–Bashforth.
//! * ABC: the equation is rewritten with the AB integral as
//!   y = y0 + (1−α)/B (f − f0) + α/B · I^α f, the RL term using product
//!   trapezoid weights and the implicit value solved by fixed-point iteration.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::operators::{Family, FractionalOrder, KernelConfig, OperatorError};
use crate::special::{central_power_second_diff, forward_power_diff, gamma};
use crate::trajectory::{StateTrajectory, TrajectoryError};

/// Maximum fixed-point iterations per implicit step.
pub const CORRECTOR_MAX_ITERATIONS: usize = 50;
/// Relative tolerance of the fixed-point corrector.
pub const CORRECTOR_TOLERANCE: f64 = 1e-12;

/// Vector field f(t, y, out).
pub type VectorField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time span [{t0}, {t_end}] is empty or not finite")]
    InvalidSpan { t0: f64, t_end: f64 },
    #[error("step {dt} must be positive and at most half the time span {span}")]
    InvalidStep { dt: f64, span: f64 },
    #[error("step {dt} does not divide the time span {span}")]
    StepMismatch { dt: f64, span: f64 },
    #[error("initial state must be non-empty and finite")]
    InvalidInitialState,
    #[error("{solver} solver cannot handle the {got} family")]
    WrongFamily { solver: &'static str, got: Family },
    #[error("reference integrator needs α = 1, got {0}")]
    NotClassical(f64),
    #[error("solution diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
    #[error("corrector did not converge at step {step} after {iterations} iterations (last change {change:e})")]
    CorrectorNotConverged { step: usize, iterations: usize, change: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Initial-value problem D^α y = f(t, y), y(t0) = y0 on [t0, t_end].
#[derive(Clone)]
pub struct FdeProblem {
    rhs: VectorField,
    y0: Vec<f64>,
    order: FractionalOrder,
    t0: f64,
    t_end: f64,
    dt: f64,
    steps: usize,
    kernel: KernelConfig,
}

impl fmt::Debug for FdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FdeProblem")
            .field("y0", &self.y0)
            .field("order", &self.order)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("dt", &self.dt)
            .field("kernel", &self.kernel)
            .finish_non_exhaustive()
    }
}

impl FdeProblem {
    pub fn new(
        rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        y0: Vec<f64>,
        order: FractionalOrder,
        t_span: (f64, f64),
        dt: f64,
    ) -> Result<Self, SolverError> {
        let (t0, t_end) = t_span;
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(SolverError::InvalidSpan { t0, t_end });
        }
        let span = t_end - t0;
        if !(dt.is_finite() && dt > 0.0 && dt <= 0.5 * span * (1.0 + 1e-12)) {
            return Err(SolverError::InvalidStep { dt, span });
        }
        let steps = (span / dt).round();
        if (steps * dt - span).abs() > 1e-9 * span {
            return Err(SolverError::StepMismatch { dt, span });
        }
        if y0.is_empty() || y0.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidInitialState);
        }
        Ok(Self { rhs: Arc::new(rhs), y0, order, t0, t_end, dt, steps: steps as usize, kernel: KernelConfig::default() })
    }

    pub fn with_kernel(mut self, kernel: KernelConfig) -> Result<Self, SolverError> {
        kernel.validate()?;
        self.kernel = kernel;
        Ok(self)
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps; the grid has `steps() + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.rhs)(t, y, out)
    }

    /// Same problem with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self, SolverError> {
        let mut p = self.clone();
        p.dt = self.dt / factor as f64;
        p.steps = self.steps * factor;
        Ok(p)
    }

    fn check_family(&self, solver: &'static str, family: Family) -> Result<(), SolverError> {
        if self.order.family() == family {
            Ok(())
        } else {
            Err(SolverError::WrongFamily { solver, got: self.order.family() })
        }
    }
}

/// History of f values stored row-major, one row per grid node.
struct History {
    dim: usize,
    data: Vec<f64>,
}

impl History {
    fn with_capacity(dim: usize, rows: usize) -> Self {
        Self { dim, data: Vec::with_capacity(dim * rows) }
    }

    fn push(&mut self, row: &[f64]) {
        self.data.extend_from_slice(row);
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Σ_j weight(j) · row(j) for j in 0..rows, accumulated into `out`.
    fn weighted_sum(&self, rows: usize, weight: impl Fn(usize) -> f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..rows {
            let w = weight(j);
            for (o, f) in out.iter_mut().zip(self.row(j)) {
                *o += w * f;
            }
        }
    }
}

fn check_finite(y: &[f64], step: usize, time: f64) -> Result<(), SolverError> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::Divergence { step, time })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Iterates y ← g(y) until the max-norm change is below tolerance.
fn fixed_point(
    y: &mut [f64],
    step: usize,
    mut update: impl FnMut(&[f64], &mut [f64]),
) -> Result<(), SolverError> {
    let mut next = vec![0.0; y.len()];
    let mut change = f64::INFINITY;
    for _ in 0..CORRECTOR_MAX_ITERATIONS {
        update(y, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Divergence { step, time: f64::NAN });
        }
        change = y.iter().zip(&next).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        y.copy_from_slice(&next);
        if change <= CORRECTOR_TOLERANCE * max_abs(y).max(1.0) {
            return Ok(());
        }
    }
    Err(SolverError::CorrectorNotConverged { step, iterations: CORRECTOR_MAX_ITERATIONS, change })
}

/// Product-rectangle and product-trapezoid weights for the RL integral.
struct AdamsWeights {
    alpha: f64,
    rect: Vec<f64>,
    trap: Vec<f64>,
    rect_scale: f64,
    trap_scale: f64,
}

impl AdamsWeights {
    fn new(alpha: f64, dt: f64, steps: usize) -> Self {
        let rect = (0..=steps).map(|k| forward_power_diff(k as f64, alpha)).collect();
        let trap = (0..=steps + 1)
            .map(|k| if k == 0 { 0.0 } else { central_power_second_diff(k as f64, alpha + 1.0) })
            .collect();
        Self {
            alpha,
            rect,
            trap,
            rect_scale: dt.powf(alpha) / gamma(alpha + 1.0),
            trap_scale: dt.powf(alpha) / gamma(alpha + 2.0),
        }
    }

    /// Rectangle-rule integral up to t_{n+1} from f_0..f_n.
    fn predictor(&self, hist: &History, n: usize, out: &mut [f64]) {
        hist.weighted_sum(n + 1, |j| self.rect[n - j], out);
        out.iter_mut().for_each(|v| *v *= self.rect_scale);
    }

    /// Explicit part of the trapezoid-rule integral up to t_{n+1}; the
    /// implicit term is `trap_scale · f_{n+1}`.
    fn corrector_history(&self, hist: &History, n: usize, out: &mut [f64]) {
        let nf = n as f64;
        let first = nf.powf(self.alpha + 1.0) - (nf - self.alpha) * (nf + 1.0).powf(self.alpha);
        hist.weighted_sum(n + 1, |j| if j == 0 { first } else { self.trap[n - j + 1] }, out);
        out.iter_mut().for_each(|v| *v *= self.trap_scale);
    }
}

/// Caputo problems by the fractional Adams–Bashforth–Moulton method.
pub fn solve_caputo(p: &FdeProblem) -> Result<StateTrajectory, SolverError> {
    p.check_family("Caputo", Family::Caputo)?;
    let dim = p.dim();
    let n_steps = p.steps();
    let weights = AdamsWeights::new(p.order().alpha(), p.dt(), n_steps);
    let mut hist = History::with_capacity(dim, n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut f = vec![0.0; dim];
    p.eval(p.t0(), p.y0(), &mut f);
    check_finite(&f, 0, p.t0())?;
    hist.push(&f);
    states.push(p.y0().to_vec());
    let mut sum = vec![0.0; dim];
    let mut pred = vec![0.0; dim];
    for n in 0..n_steps {
        let t_next = p.time(n + 1);
        weights.predictor(&hist, n, &mut sum);
        for ((y, s), y0) in pred.iter_mut().zip(&sum).zip(p.y0()) {
            *y = y0 + s;
        }
        check_finite(&pred, n + 1, t_next)?;
        p.eval(t_next, &pred, &mut f);
        weights.corrector_history(&hist, n, &mut sum);
        let y_next: Vec<f64> = p
            .y0()
            .iter()
            .zip(&sum)
            .zip(&f)
            .map(|((y0, s), fp)| y0 + s + weights.trap_scale * fp)
            .collect();
        check_finite(&y_next, n + 1, t_next)?;
        p.eval(t_next, &y_next, &mut f);
        check_finite(&f, n + 1, t_next)?;
        hist.push(&f);
        states.push(y_next);
    }
    Ok(StateTrajectory::new(p.t0(), p.dt(), states)?)
}

/// Atangana–Baleanu–Caputo problems.
pub fn solve_abc(p: &FdeProblem) -> Result<StateTrajectory, SolverError> {
    p.check_family("ABC", Family::Abc)?;
    let alpha = p.order().alpha();
    let b = p.kernel().normalization(alpha);
    let local = (1.0 - alpha) / b;
    let memory = alpha / b;
    let dim = p.dim();
    let n_steps = p.steps();
    let weights = AdamsWeights::new(alpha, p.dt(), n_steps);
    let mut hist = History::with_capacity(dim, n_steps + 1);
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut f0 = vec![0.0; dim];
    p.eval(p.t0(), p.y0(), &mut f0);
    check_finite(&f0, 0, p.t0())?;
    hist.push(&f0);
    states.push(p.y0().to_vec());
    let mut sum = vec![0.0; dim];
    let mut f = vec![0.0; dim];
    for n in 0..n_steps {
        let t_next = p.time(n + 1);
        weights.predictor(&hist, n, &mut sum);
        let f_n = hist.row(n);
        let mut y: Vec<f64> = (0..dim)
            .map(|i| p.y0()[i] + local * (f_n[i] - f0[i]) + memory * sum[i])
            .collect();
        check_finite(&y, n + 1, t_next)?;
        weights.corrector_history(&hist, n, &mut sum);
        fixed_point(&mut y, n + 1, |y, next| {
            p.eval(t_next, y, &mut f);
            for i in 0..dim {
                next[i] = p.y0()[i] + local * (f[i] - f0[i]) + memory * (sum[i] + weights.trap_scale * f[i]);
            }
        })
        .map_err(|e| with_time(e, t_next))?;
        p.eval(t_next, &y, &mut f);
        check_finite(&f, n + 1, t_next)?;
        hist.push(&f);
        states.push(y);
    }
    Ok(StateTrajectory::new(p.t0(), p.dt(), states)?)
}

/// Caputo–Fabrizio problems. At α = 1 the scheme is classical two-step
/// Adams–Bashforth.
pub fn solve_cf(p: &FdeProblem) -> Result<StateTrajectory, SolverError> {
    p.check_family("CF", Family::CaputoFabrizio)?;
    let alpha = p.order().alpha();
    let (local, memory) = if alpha == 1.0 {
        (0.0, 1.0)
    } else {
        let b = p.kernel().normalization(alpha);
        (2.0 * (1.0 - alpha) / (b * (2.0 - alpha)), 2.0 * alpha / (b * (2.0 - alpha)))
    };
    let dim = p.dim();
    let dt = p.dt();
    let n_steps = p.steps();
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    let mut f0 = vec![0.0; dim];
    p.eval(p.t0(), p.y0(), &mut f0);
    check_finite(&f0, 0, p.t0())?;
    states.push(p.y0().to_vec());
    let mut f_prev = f0.clone();
    let mut f_curr = f0.clone();
    let mut integral = vec![0.0; dim];
    let mut f = vec![0.0; dim];
    for n in 0..n_steps {
        let t_next = p.time(n + 1);
        for i in 0..dim {
            integral[i] += if n == 0 { dt * f_curr[i] } else { dt * (1.5 * f_curr[i] - 0.5 * f_prev[i]) };
        }
        let explicit: Vec<f64> = (0..dim).map(|i| p.y0()[i] - local * f0[i] + memory * integral[i]).collect();
        let mut y = states[n].clone();
        if local == 0.0 {
            y.copy_from_slice(&explicit);
        } else {
            fixed_point(&mut y, n + 1, |y, next| {
                p.eval(t_next, y, &mut f);
                for i in 0..dim {
                    next[i] = explicit[i] + local * f[i];
                }
            })
            .map_err(|e| with_time(e, t_next))?;
        }
        check_finite(&y, n + 1, t_next)?;
        p.eval(t_next, &y, &mut f);
        check_finite(&f, n + 1, t_next)?;
        std::mem::swap(&mut f_prev, &mut f_curr);
        f_curr.copy_from_slice(&f);
        states.push(y);
    }
    Ok(StateTrajectory::new(p.t0(), p.dt(), states)?)
}

fn with_time(e: SolverError, time: f64) -> SolverError {
    match e {
        SolverError::Divergence { step, .. } => SolverError::Divergence { step, time },
        other => other,
    }
}

/// Classical fourth-order Runge–Kutta; reference integrator for α = 1.
pub fn rk4_oracle(p: &FdeProblem) -> Result<StateTrajectory, SolverError> {
    if p.order().alpha() != 1.0 {
        return Err(SolverError::NotClassical(p.order().alpha()));
    }
    let dim = p.dim();
    let h = p.dt();
    let mut states = Vec::with_capacity(p.steps() + 1);
    states.push(p.y0().to_vec());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    for n in 0..p.steps() {
        let t = p.time(n);
        let y: &Vec<f64> = &states[n];
        p.eval(t, y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        p.eval(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        p.eval(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        p.eval(t + h, &tmp, &mut k4);
        let next: Vec<f64> = (0..dim).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        check_finite(&next, n + 1, t + h)?;
        states.push(next);
    }
    Ok(StateTrajectory::new(p.t0(), p.dt(), states)?)
}

/// Dispatches on the problem's derivative family.
pub fn solve(p: &FdeProblem) -> Result<StateTrajectory, SolverError> {
    match p.order().family() {
        Family::Caputo => solve_caputo(p),
        Family::CaputoFabrizio => solve_cf(p),
        Family::Abc => solve_abc(p),
        Family::RlIntegral => Err(SolverError::WrongFamily { solver: "fractional", got: Family::RlIntegral }),
    }
}
