//! Uniformly sampled scalar and vector trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("start time must be finite, got {0}")]
    InvalidStart(f64),
    #[error("trajectory needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("samples are not uniformly spaced (node {index}: spacing {spacing}, expected {expected})")]
    NonUniform { index: usize, spacing: f64, expected: f64 },
    #[error("length mismatch: {0} times but {1} values")]
    LengthMismatch(usize, usize),
}

/// Scalar samples u(t0 + k·dt), k = 0..N−1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTrajectory {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl SampledTrajectory {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, TrajectoryError> {
        if !t0.is_finite() {
            return Err(TrajectoryError::InvalidStart(t0));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TrajectoryError::InvalidStep(dt));
        }
        if values.len() < 2 {
            return Err(TrajectoryError::TooShort { needed: 2, got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TrajectoryError::NonFinite { index, value });
        }
        Ok(Self { t0, dt, values })
    }

    /// Samples `f` on `intervals + 1` nodes.
    pub fn from_fn(t0: f64, dt: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Result<Self, TrajectoryError> {
        let values = (0..=intervals).map(|k| f(t0 + k as f64 * dt)).collect();
        Self::new(t0, dt, values)
    }

    /// Builds a trajectory from explicit sample times, checking that the
    /// spacing is uniform to within `rel_tol · dt`.
    pub fn from_samples(times: &[f64], values: Vec<f64>, rel_tol: f64) -> Result<Self, TrajectoryError> {
        if times.len() != values.len() {
            return Err(TrajectoryError::LengthMismatch(times.len(), values.len()));
        }
        if times.len() < 2 {
            return Err(TrajectoryError::TooShort { needed: 2, got: times.len() });
        }
        let n = times.len() - 1;
        let dt = (times[n] - times[0]) / n as f64;
        for (index, w) in times.windows(2).enumerate() {
            let spacing = w[1] - w[0];
            if (spacing - dt).abs() > rel_tol * dt.abs() {
                return Err(TrajectoryError::NonUniform { index: index + 1, spacing, expected: dt });
            }
        }
        Self::new(times[0], dt, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.time(k))
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Same grid, values transformed pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, TrajectoryError> {
        Self::new(self.t0, self.dt, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Same grid, fallible pointwise transform.
    pub fn try_map<E>(&self, f: impl Fn(f64) -> Result<f64, E>) -> Result<Result<Self, TrajectoryError>, E> {
        let values = self.values.iter().map(|&v| f(v)).collect::<Result<Vec<_>, E>>()?;
        Ok(Self::new(self.t0, self.dt, values))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let values = self.values.iter().enumerate().map(|(k, &v)| f(k, v)).collect();
        self.with_values(values)
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { t0: self.t0, dt: self.dt, values }
    }
}

/// Vector-valued samples; `states[k]` is the state at t0 + k·dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrajectory {
    t0: f64,
    dt: f64,
    states: Vec<Vec<f64>>,
}

impl StateTrajectory {
    pub fn new(t0: f64, dt: f64, states: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TrajectoryError::InvalidStep(dt));
        }
        if states.len() < 2 {
            return Err(TrajectoryError::TooShort { needed: 2, got: states.len() });
        }
        Ok(Self { t0, dt, states })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    /// Scalar trajectory of one state component.
    pub fn component(&self, i: usize) -> Result<SampledTrajectory, TrajectoryError> {
        SampledTrajectory::new(self.t0, self.dt, self.states.iter().map(|s| s[i]).collect())
    }
}
