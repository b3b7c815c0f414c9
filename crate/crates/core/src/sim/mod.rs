//! Closed-loop corridor experiments.
//!
//! The robot drives along the centerline of a straight corridor from
//! `x = 0` to `x = corridor_length` while pedestrians walk in both
//! directions. The simulator advances at `sim_dt`; the planner runs every
//! `robot.dt / sim_dt` ticks and its first input is held in between.

mod batch;
mod episode;

pub use batch::{aggregate, run_batch, AggregateRow, BatchResult};
pub use episode::{
    metrics_from_trace, run_episode, ControllerTick, EpisodeOutcome, EpisodeTrace, ExperimentRecord, TickRecord,
};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mppi::{PlannerConfig, ReferencePath};
use crate::obstacles::{LateralBand, NoiseParams, SocialForceParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PedestrianModel {
    /// Social forces plus additive velocity noise; constant-velocity forecasts.
    Gaussian,
    /// Markov-chain walkers with four-mode mixture forecasts.
    Markov,
}

impl std::fmt::Display for PedestrianModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PedestrianModel::Gaussian => "gaussian",
            PedestrianModel::Markov => "markov",
        })
    }
}

/// What the planner is shown of each forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionModes {
    #[default]
    Full,
    /// Only the dominant mean, as a near-deterministic obstacle.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub corridor_width: f64,
    pub corridor_length: f64,
    pub n_pedestrians: usize,
    pub pedestrian_model: PedestrianModel,
    pub seed: u64,
    pub v_ref: f64,
    /// Episode time limit (s).
    pub timeout: f64,
    pub sim_dt: f64,
    pub pedestrian_radius: f64,
    /// Pedestrians start no closer to the robot than this along the corridor.
    pub spawn_x_min: f64,
    /// Distance beyond either corridor end where pedestrians leave and re-enter.
    pub respawn_margin: f64,
    pub noise: NoiseParams,
    pub social: SocialForceParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            corridor_width: 6.0,
            corridor_length: 35.0,
            n_pedestrians: 4,
            pedestrian_model: PedestrianModel::Gaussian,
            seed: 0,
            v_ref: 2.0,
            timeout: 60.0,
            sim_dt: 0.05,
            pedestrian_radius: 0.3,
            spawn_x_min: 5.0,
            respawn_margin: 5.0,
            noise: NoiseParams::default(),
            social: SocialForceParams::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self, robot_radius: f64) -> Result<(), ConfigError> {
        if !(self.corridor_width > 2.0 * robot_radius) {
            return Err(ConfigError::invalid("corridor_width", "must exceed the robot diameter"));
        }
        if !(self.corridor_width > 2.0 * self.pedestrian_radius) {
            return Err(ConfigError::invalid("corridor_width", "must exceed the pedestrian diameter"));
        }
        for (field, value) in [
            ("corridor_length", self.corridor_length),
            ("v_ref", self.v_ref),
            ("timeout", self.timeout),
            ("sim_dt", self.sim_dt),
            ("pedestrian_radius", self.pedestrian_radius),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::invalid(field, "must be positive"));
            }
        }
        if !(self.spawn_x_min >= 0.0 && self.spawn_x_min < self.corridor_length) {
            return Err(ConfigError::invalid("spawn_x_min", "must lie inside the corridor"));
        }
        if !(self.respawn_margin >= 0.0) {
            return Err(ConfigError::invalid("respawn_margin", "must be non-negative"));
        }
        self.noise.validate().map_err(|e| e.within("noise"))?;
        self.social.validate().map_err(|e| e.within("social"))?;
        Ok(())
    }

    /// Walls at `y = ±width/2`.
    pub fn walls(&self) -> LateralBand {
        let h = 0.5 * self.corridor_width;
        LateralBand::new(-h, h)
    }

    /// Admissible pedestrian centers.
    pub fn pedestrian_band(&self) -> LateralBand {
        let h = 0.5 * self.corridor_width - self.pedestrian_radius;
        LateralBand::new(-h, h)
    }

    pub fn reference(&self, robot_radius: f64) -> ReferencePath {
        ReferencePath::new(
            Vector2::zeros(),
            Vector2::new(self.corridor_length, 0.0),
            self.v_ref,
            Some(0.5 * self.corridor_width - robot_radius),
        )
    }

    /// Number of sim ticks per planner step.
    pub fn control_period(&self, planner_dt: f64) -> Result<usize, ConfigError> {
        let ratio = planner_dt / self.sim_dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(ConfigError::invalid("sim_dt", "planner dt must be an integer multiple of sim_dt"));
        }
        Ok(n as usize)
    }
}

/// A named planner configuration for batch runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSetup {
    pub name: String,
    pub config: PlannerConfig,
    pub modes: PredictionModes,
}

impl PlannerSetup {
    pub fn dra(config: PlannerConfig) -> Self {
        Self {
            name: "dra".into(),
            config,
            modes: PredictionModes::Full,
        }
    }

    /// Risk weights zeroed, obstacles reduced to their mean predictions.
    pub fn vanilla(mut config: PlannerConfig) -> Self {
        config.weights.omega_soft = 0.0;
        config.weights.omega_hard = 0.0;
        Self {
            name: "vanilla".into(),
            config,
            modes: PredictionModes::Mean,
        }
    }
}
