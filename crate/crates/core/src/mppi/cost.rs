use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotState;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub w_tracking: f64,
    pub w_speed: f64,
    pub w_rotation: f64,
    pub omega_soft: f64,
    pub omega_hard: f64,
    /// Risk level at which the hard penalty switches on (inclusive).
    pub sigma_threshold: f64,
    /// Penalty per step on overlapping the mean position of an obstacle.
    pub w_collision: f64,
    /// Quadratic penalty on lateral excursion past the corridor limit.
    pub w_wall: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_tracking: 10.0,
            w_speed: 2.0,
            w_rotation: 0.5,
            omega_soft: 50.0,
            omega_hard: 10_000.0,
            sigma_threshold: 0.05,
            w_collision: 10_000.0,
            w_wall: 1_000.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("w_tracking", self.w_tracking),
            ("w_speed", self.w_speed),
            ("w_rotation", self.w_rotation),
            ("omega_soft", self.omega_soft),
            ("omega_hard", self.omega_hard),
            ("w_collision", self.w_collision),
            ("w_wall", self.w_wall),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConfigError::invalid(field, "must be non-negative"));
            }
        }
        if self.omega_hard < 100.0 * self.omega_soft {
            return Err(ConfigError::invalid("omega_hard", "must be at least 100 * omega_soft"));
        }
        if !(self.sigma_threshold > 0.0 && self.sigma_threshold < 1.0) {
            return Err(ConfigError::invalid("sigma_threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn risk_enabled(&self) -> bool {
        self.omega_soft > 0.0 || self.omega_hard > 0.0
    }
}

/// Straight reference path with a reference speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    pub start: Vector2<f64>,
    /// Unit direction of travel.
    pub direction: Vector2<f64>,
    pub v_ref: f64,
    /// Largest admissible |lateral offset| of the robot center, if walled.
    pub lateral_limit: Option<f64>,
}

impl ReferencePath {
    pub fn new(start: Vector2<f64>, end: Vector2<f64>, v_ref: f64, lateral_limit: Option<f64>) -> Self {
        let direction = (end - start).normalize();
        Self {
            start,
            direction,
            v_ref,
            lateral_limit,
        }
    }

    /// Arc length of the projection onto the path.
    pub fn progress(&self, p: &Vector2<f64>) -> f64 {
        (p - self.start).dot(&self.direction)
    }

    /// Signed offset, positive to the left of the direction of travel.
    pub fn lateral(&self, p: &Vector2<f64>) -> f64 {
        let d = p - self.start;
        self.direction.x * d.y - self.direction.y * d.x
    }

    /// Per-step references for a plan starting at `state`: the target
    /// progress advances by `v_ref * dt` every step.
    pub fn stages(&self, state: &RobotState, horizon: usize, dt: f64) -> Vec<StageReference> {
        let s0 = self.progress(&state.position());
        (1..=horizon)
            .map(|t| StageReference {
                path: *self,
                target_progress: s0 + self.v_ref * dt * t as f64,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReference {
    pub path: ReferencePath,
    pub target_progress: f64,
}

/// Lateral error squared plus progress shortfall, weighted.
pub(crate) fn tracking_cost(state: &RobotState, reference: &StageReference, weights: &CostWeights) -> f64 {
    let p = state.position();
    let lateral = reference.path.lateral(&p);
    let shortfall = (reference.target_progress - reference.path.progress(&p)).max(0.0);
    weights.w_tracking * (lateral * lateral + shortfall)
}

pub fn stage_cost(state: &RobotState, risk: f64, reference: &StageReference, weights: &CostWeights) -> f64 {
    let mut cost = tracking_cost(state, reference, weights);
    let dv = state.v - reference.path.v_ref;
    cost += weights.w_speed * dv * dv;
    cost += weights.w_rotation * state.omega * state.omega;
    cost += weights.omega_soft * risk;
    if risk >= weights.sigma_threshold {
        cost += weights.omega_hard;
    }
    if let Some(limit) = reference.path.lateral_limit {
        let excess = (reference.path.lateral(&state.position()).abs() - limit).max(0.0);
        cost += weights.w_wall * excess * excess;
    }
    cost
}
