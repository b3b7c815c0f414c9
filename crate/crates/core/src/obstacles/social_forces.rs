//! Helbing-style social forces used as pedestrian ground truth.

use std::f64::consts::TAU;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{LateralBand, ObstacleState};
use crate::dynamics::RobotState;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialForceParams {
    /// Relaxation time toward the preferred velocity (s).
    pub tau: f64,
    pub preferred_speed: f64,
    pub max_speed: f64,
    pub agent_strength: f64,
    pub agent_range: f64,
    pub wall_strength: f64,
    pub wall_range: f64,
    /// The robot repels pedestrians like one more agent of this radius.
    pub robot_radius: f64,
    /// Wall lines (not the band of admissible centers).
    pub walls: Option<LateralBand>,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            preferred_speed: 1.3,
            max_speed: 1.8,
            agent_strength: 2.0,
            agent_range: 0.4,
            wall_strength: 2.0,
            wall_range: 0.3,
            robot_radius: 0.4,
            walls: None,
        }
    }
}

impl SocialForceParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("tau", self.tau),
            ("max_speed", self.max_speed),
            ("agent_range", self.agent_range),
            ("wall_range", self.wall_range),
            ("robot_radius", self.robot_radius),
        ] {
            if !(value > 0.0) {
                return Err(ConfigError::invalid(field, "must be positive"));
            }
        }
        if self.preferred_speed < 0.0 || self.agent_strength < 0.0 || self.wall_strength < 0.0 {
            return Err(ConfigError::invalid("preferred_speed", "strengths and speeds must be non-negative"));
        }
        Ok(())
    }
}

/// Unit vector used when two centers coincide. Depends only on the
/// unordered pair, and flips sign with the order, so the two agents are
/// pushed apart.
fn tie_break_direction(i: usize, j: usize) -> Vector2<f64> {
    let (a, b) = (i.min(j) as u64, i.max(j) as u64);
    let h = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    let angle = (h >> 11) as f64 / (1u64 << 53) as f64 * TAU;
    let dir = Vector2::new(angle.cos(), angle.sin());
    if i < j {
        dir
    } else {
        -dir
    }
}

fn repulsion(
    from: Vector2<f64>,
    other: Vector2<f64>,
    radii: f64,
    strength: f64,
    range: f64,
    pair: (usize, usize),
) -> Vector2<f64> {
    let diff = from - other;
    let dist = diff.norm();
    let dir = if dist > 1e-9 {
        diff / dist
    } else {
        tie_break_direction(pair.0, pair.1)
    };
    dir * strength * ((radii - dist) / range).exp()
}

const ROBOT_INDEX: usize = usize::MAX;

/// Synchronous social-forces update of every agent: velocity relaxes toward
/// the preferred velocity and is pushed by agent, robot and wall repulsion,
/// then capped at `max_speed`; position advances by the new velocity.
pub fn social_forces_step(
    agents: &[ObstacleState],
    robot: &RobotState,
    dt: f64,
    params: &SocialForceParams,
) -> Vec<ObstacleState> {
    let robot_pos = robot.position();
    agents
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let to_goal = agent.goal - agent.position;
            let desired = if to_goal.norm() > 1e-9 {
                to_goal.normalize() * params.preferred_speed
            } else {
                Vector2::zeros()
            };
            let mut force = (desired - agent.velocity) / params.tau;

            for (j, other) in agents.iter().enumerate() {
                if i != j {
                    force += repulsion(
                        agent.position,
                        other.position,
                        agent.radius + other.radius,
                        params.agent_strength,
                        params.agent_range,
                        (i, j),
                    );
                }
            }
            force += repulsion(
                agent.position,
                robot_pos,
                agent.radius + params.robot_radius,
                params.agent_strength,
                params.agent_range,
                (i, ROBOT_INDEX),
            );
            if let Some(walls) = params.walls {
                let below = agent.position.y - walls.lo;
                let above = walls.hi - agent.position.y;
                force.y += params.wall_strength * ((agent.radius - below) / params.wall_range).exp();
                force.y -= params.wall_strength * ((agent.radius - above) / params.wall_range).exp();
            }

            let mut velocity = agent.velocity + force * dt;
            let speed = velocity.norm();
            if speed > params.max_speed {
                velocity *= params.max_speed / speed;
            }
            ObstacleState {
                position: agent.position + velocity * dt,
                velocity,
                ..*agent
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn far_robot() -> RobotState {
        RobotState::at_rest(1.0e3, 1.0e3, 0.0)
    }

    #[test]
    fn agent_at_preferred_velocity_keeps_it() {
        let p = SocialForceParams::default();
        let a = ObstacleState::new(Vector2::new(0.0, 0.0), Vector2::new(1.3, 0.0), 0.3, Vector2::new(30.0, 0.0));
        let next = social_forces_step(&[a], &far_robot(), 0.05, &p);
        assert_relative_eq!(next[0].velocity, a.velocity, epsilon = 1e-12);
        assert_relative_eq!(next[0].position.x, 1.3 * 0.05, epsilon = 1e-12);
    }

    #[test]
    fn agent_at_rest_relaxes_toward_goal() {
        let p = SocialForceParams::default();
        let a = ObstacleState::new(Vector2::new(0.0, 0.0), Vector2::zeros(), 0.3, Vector2::new(0.0, 20.0));
        let dt = 0.05;
        let next = social_forces_step(&[a], &far_robot(), dt, &p);
        assert_relative_eq!(next[0].velocity.y, dt / p.tau * 1.3, epsilon = 1e-12);
        assert_relative_eq!(next[0].velocity.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn head_on_pair_is_mirror_symmetric() {
        let p = SocialForceParams {
            walls: Some(LateralBand::new(-3.0, 3.0)),
            ..SocialForceParams::default()
        };
        let a = ObstacleState::new(Vector2::new(-1.0, 0.4), Vector2::new(1.2, 0.0), 0.3, Vector2::new(10.0, 0.4));
        let b = ObstacleState::new(Vector2::new(1.0, 0.4), Vector2::new(-1.2, 0.0), 0.3, Vector2::new(-10.0, 0.4));
        // a robot on the mirror axis keeps the scene symmetric under x -> -x
        let robot = RobotState::at_rest(0.0, -2.0, 0.0);
        let mut agents = vec![a, b];
        for _ in 0..20 {
            agents = social_forces_step(&agents, &robot, 0.05, &p);
            assert_relative_eq!(agents[0].position.x, -agents[1].position.x, epsilon = 1e-12);
            assert_relative_eq!(agents[0].position.y, agents[1].position.y, epsilon = 1e-12);
            assert_relative_eq!(agents[0].velocity.x, -agents[1].velocity.x, epsilon = 1e-12);
        }
    }

    #[test]
    fn coincident_agents_are_pushed_apart() {
        let p = SocialForceParams {
            preferred_speed: 0.0,
            ..SocialForceParams::default()
        };
        let a = ObstacleState::new(Vector2::new(2.0, 2.0), Vector2::zeros(), 0.3, Vector2::new(2.0, 2.0));
        let next = social_forces_step(&[a, a], &far_robot(), 0.05, &p);
        assert!(next.iter().all(|s| s.velocity.iter().all(|v| v.is_finite())));
        assert_relative_eq!(next[0].velocity, -next[1].velocity, epsilon = 1e-12);
        assert!(next[0].velocity.norm() > 0.0);
        assert_eq!(next, social_forces_step(&[a, a], &far_robot(), 0.05, &p));
    }

    #[test]
    fn speed_is_capped_and_robot_repels() {
        let p = SocialForceParams::default();
        let a = ObstacleState::new(Vector2::new(0.0, 0.0), Vector2::new(1.3, 0.0), 0.3, Vector2::new(30.0, 0.0));
        let robot = RobotState::at_rest(0.5, 0.05, 0.0);
        let next = social_forces_step(&[a], &robot, 0.05, &p);
        assert!(next[0].velocity.norm() <= p.max_speed + 1e-12);
        assert!(next[0].velocity.x < 1.3);
        assert!(next[0].velocity.y < 0.0);
    }
}
