//! Risk-aware MPPI controller.
//!
//! Input perturbations are smooth splines through Halton knots. Every rollout
//! is scored with a tracking/speed/rotation cost plus a soft linear penalty on
//! its estimated collision probability and a large hard penalty once that
//! probability reaches the threshold, which removes the sample from the
//! weighted average in practice. One sample always commands zero velocity for
//! the whole horizon so that braking stays available.

mod controller;
mod cost;
mod halton;
mod sampling;
mod spline;
mod weights;

pub use controller::{plan, plan_with_rollouts, Controller, Diagnostics, PlannerConfig, PlannerOutput, Rollout};
pub use cost::{stage_cost, CostWeights, ReferencePath, StageReference};
pub use halton::{halton_point, radical_inverse, seeded_offset};
pub use sampling::{sample_halton_splines, Perturbation};
pub use spline::CubicSpline;
pub use weights::{importance_sampling, update_beta, ImportanceWeights};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiParams {
    /// Number of rollouts K, including the zero-velocity sample.
    pub samples: usize,
    /// Horizon T in steps.
    pub horizon: usize,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    /// Spline knots per input channel.
    pub n_knots: usize,
    pub beta_init: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub gamma: f64,
    pub eta_lower: f64,
    pub eta_upper: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        Self {
            samples: 400,
            horizon: 20,
            sigma_v: 0.6,
            sigma_omega: 0.8,
            n_knots: 4,
            beta_init: 1.0,
            beta_min: 0.01,
            beta_max: 10.0,
            gamma: 0.9,
            eta_lower: 2.0,
            eta_upper: 12.0,
        }
    }
}

impl MppiParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples < 2 {
            return Err(ConfigError::invalid("samples", "need the braking sample plus at least one more"));
        }
        if self.horizon < 1 {
            return Err(ConfigError::invalid("horizon", "must be at least 1"));
        }
        if self.n_knots < 2 {
            return Err(ConfigError::invalid("n_knots", "must be at least 2"));
        }
        if 2 * self.n_knots > 24 {
            return Err(ConfigError::invalid("n_knots", "at most 12 knots per channel"));
        }
        if !(self.sigma_v >= 0.0 && self.sigma_omega >= 0.0) {
            return Err(ConfigError::invalid("sigma_v", "sampling deviations must be non-negative"));
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max) {
            return Err(ConfigError::invalid("beta_min", "need 0 < beta_min <= beta_max"));
        }
        if !(self.beta_init >= self.beta_min && self.beta_init <= self.beta_max) {
            return Err(ConfigError::invalid("beta_init", "must lie in [beta_min, beta_max]"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ConfigError::invalid("gamma", "must lie in (0, 1)"));
        }
        if !(self.eta_lower >= 1.0 && self.eta_lower <= self.eta_upper) {
            return Err(ConfigError::invalid("eta_lower", "need 1 <= eta_lower <= eta_upper"));
        }
        Ok(())
    }
}
