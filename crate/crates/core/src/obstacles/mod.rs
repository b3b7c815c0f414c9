//! Pedestrian models.
//!
//! Ground-truth simulators ([`social_forces`], [`walkers`]) move the agents
//! in the closed-loop experiments; [`prediction`] produces the
//! Mixture-of-Gaussians forecasts the planner consumes.

mod prediction;
mod social_forces;
mod walkers;

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub use prediction::{predict_constant_velocity, predict_markov_mog, reduce_to_means, COVARIANCE_FLOOR};
pub use social_forces::{social_forces_step, SocialForceParams};
pub use walkers::{gaussian_walker_step, markov_walker_step, try_switch};
pub(crate) use walkers::reflect;

/// Direction state of a Markov-chain walker. Social-forces agents stay
/// `Horizontal` and ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WalkerMode {
    Horizontal,
    /// `lateral_sign` is +1 or -1: the sign of the y-velocity.
    Diagonal { lateral_sign: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub radius: f64,
    pub goal: Vector2<f64>,
    pub mode: WalkerMode,
}

impl ObstacleState {
    pub fn new(position: Vector2<f64>, velocity: Vector2<f64>, radius: f64, goal: Vector2<f64>) -> Self {
        assert!(radius > 0.0, "obstacle radius must be positive");
        Self {
            position,
            velocity,
            radius,
            goal,
            mode: WalkerMode::Horizontal,
        }
    }

    /// Longitudinal walking direction (+1 or -1), toward the goal.
    pub fn heading_sign(&self) -> f64 {
        let dx = self.goal.x - self.position.x;
        if dx != 0.0 {
            dx.signum()
        } else if self.velocity.x != 0.0 {
            self.velocity.x.signum()
        } else {
            1.0
        }
    }
}

/// Allowed range of a lateral coordinate; used for corridor walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralBand {
    pub lo: f64,
    pub hi: f64,
}

impl LateralBand {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty lateral band");
        Self { lo, hi }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Reflects `y` back into the band as a ball bouncing between the walls
    /// would. The flag is true when an odd number of reflections happened,
    /// i.e. the lateral direction of motion is reversed.
    pub fn fold(&self, y: f64) -> (f64, bool) {
        if (self.lo..=self.hi).contains(&y) {
            return (y, false);
        }
        let width = self.hi - self.lo;
        let u = (y - self.lo).rem_euclid(2.0 * width);
        if u <= width {
            (self.lo + u, false)
        } else {
            (self.lo + 2.0 * width - u, true)
        }
    }
}

/// One Gaussian component of a position forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
    pub weight: f64,
}

impl GaussianMode {
    pub fn new(mean: Vector2<f64>, covariance: Matrix2<f64>, weight: f64) -> Result<Self, ConfigError> {
        let mode = Self {
            mean,
            covariance,
            weight,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn isotropic(mean: Vector2<f64>, variance: f64, weight: f64) -> Result<Self, ConfigError> {
        Self::new(mean, Matrix2::identity() * variance, weight)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.covariance;
        if !c.iter().all(|v| v.is_finite()) || !self.mean.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::invalid("covariance", "non-finite entry"));
        }
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-12 * (1.0 + c[(0, 1)].abs()) {
            return Err(ConfigError::invalid("covariance", "not symmetric"));
        }
        // A 2x2 symmetric matrix is positive definite iff a > 0 and det > 0.
        if !(c[(0, 0)] > 0.0 && c.determinant() > 0.0) {
            return Err(ConfigError::invalid("covariance", "not positive definite"));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(ConfigError::invalid("weight", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Unweighted Gaussian density at `point`.
    pub fn density(&self, point: &Vector2<f64>) -> f64 {
        let c = &self.covariance;
        let det = c.determinant();
        let d = point - self.mean;
        let q = (c[(1, 1)] * d.x * d.x - 2.0 * c[(0, 1)] * d.x * d.y + c[(0, 0)] * d.y * d.y) / det;
        (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
    }
}

/// Forecast of one obstacle. `steps[i]` describes the position `i + 1`
/// planner steps ahead of the time the forecast was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePrediction {
    pub radius: f64,
    steps: Vec<Vec<GaussianMode>>,
}

impl ObstaclePrediction {
    pub fn new(radius: f64, steps: Vec<Vec<GaussianMode>>) -> Result<Self, ConfigError> {
        let prediction = Self { radius, steps };
        prediction.validate()?;
        Ok(prediction)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.radius > 0.0) {
            return Err(ConfigError::invalid("radius", "must be positive"));
        }
        if self.steps.is_empty() {
            return Err(ConfigError::invalid("steps", "empty forecast"));
        }
        let n_modes = self.steps[0].len();
        if n_modes == 0 {
            return Err(ConfigError::invalid("steps", "a step has no modes"));
        }
        for (t, modes) in self.steps.iter().enumerate() {
            if modes.len() != n_modes {
                return Err(ConfigError::invalid(
                    format!("steps[{t}]"),
                    "mode count differs from the first step",
                ));
            }
            let mut total = 0.0;
            for (i, m) in modes.iter().enumerate() {
                m.validate().map_err(|e| e.within(&format!("steps[{t}][{i}]")))?;
                total += m.weight;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(ConfigError::invalid(format!("steps[{t}]"), "mode weights do not sum to 1"));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn n_modes(&self) -> usize {
        self.steps[0].len()
    }

    pub fn modes(&self, t: usize) -> &[GaussianMode] {
        &self.steps[t]
    }

    pub fn steps(&self) -> &[Vec<GaussianMode>] {
        &self.steps
    }

    /// Mixture density at `point` for step `t`.
    pub fn density(&self, t: usize, point: &Vector2<f64>) -> f64 {
        self.steps[t].iter().map(|m| m.weight * m.density(point)).sum()
    }

    /// Mean of the highest-weight mode at step `t`.
    pub fn dominant_mean(&self, t: usize) -> Vector2<f64> {
        self.steps[t]
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .map(|m| m.mean)
            .expect("non-empty step")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    /// Per-axis standard deviation of the velocity noise (m/s).
    pub sigma_w: f64,
    /// Probability of a horizontal-to-diagonal switch per planner step.
    pub p_switch: f64,
    /// Planner steps between switch opportunities in the forecast.
    pub block_len: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma_w: 0.3,
            p_switch: 0.025,
            block_len: 5,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sigma_w >= 0.0 && self.sigma_w.is_finite()) {
            return Err(ConfigError::invalid("sigma_w", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.p_switch) {
            return Err(ConfigError::invalid("p_switch", "must lie in [0, 1]"));
        }
        if self.block_len < 1 {
            return Err(ConfigError::invalid("block_len", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fold_reflects_at_walls() {
        let band = LateralBand::new(-1.0, 1.0);
        assert_eq!(band.fold(0.5), (0.5, false));
        let (y, flipped) = band.fold(1.25);
        assert_relative_eq!(y, 0.75);
        assert!(flipped);
        let (y, flipped) = band.fold(-3.5);
        assert_relative_eq!(y, 0.5);
        assert!(!flipped);
    }

    #[test]
    fn rejects_degenerate_covariance() {
        let m = Vector2::zeros();
        assert!(GaussianMode::new(m, Matrix2::zeros(), 1.0).is_err());
        assert!(GaussianMode::new(m, Matrix2::new(1.0, 2.0, 2.0, 1.0), 1.0).is_err());
        assert!(GaussianMode::new(m, Matrix2::new(1.0, 0.1, 0.0, 1.0), 1.0).is_err());
        assert!(GaussianMode::new(m, Matrix2::identity(), 1.5).is_err());
        assert!(GaussianMode::new(m, Matrix2::new(1.0, 0.3, 0.3, 0.5), 1.0).is_ok());
    }

    #[test]
    fn density_matches_closed_form() {
        let mode = GaussianMode::isotropic(Vector2::new(1.0, 2.0), 0.09, 1.0).unwrap();
        let peak = 1.0 / (2.0 * PI * 0.09);
        assert_relative_eq!(mode.density(&Vector2::new(1.0, 2.0)), peak, epsilon = 1e-12);
        assert_relative_eq!(
            mode.density(&Vector2::new(1.3, 2.0)),
            peak * (-0.5f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn prediction_weight_sum_checked() {
        let m = GaussianMode::isotropic(Vector2::zeros(), 1.0, 0.6).unwrap();
        assert!(ObstaclePrediction::new(0.3, vec![vec![m, m]]).is_err());
        let half = GaussianMode { weight: 0.5, ..m };
        assert!(ObstaclePrediction::new(0.3, vec![vec![half, half]]).is_ok());
        assert!(ObstaclePrediction::new(0.3, vec![vec![half, half], vec![GaussianMode { weight: 1.0, ..m }]]).is_err());
    }
}
