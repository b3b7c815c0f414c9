//! Second-order unicycle model.
//!
//! The robot is commanded with a linear speed and an angular rate. Both are
//! tracked through first-order lags, so the actual velocities trail the
//! commands by the time constants `tau_v` and `tau_omega`. Position is
//! integrated with the post-update velocities (semi-implicit Euler).

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Pose and velocities of the ego robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading, always in (-pi, pi].
    pub psi: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, psi: f64, v: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
            v,
            omega,
        }
    }

    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self::new(x, y, psi, 0.0, 0.0)
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Commanded velocities. Always inside the input box of the params used to
/// build it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v_cmd: f64,
    pub omega_cmd: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        v_cmd: 0.0,
        omega_cmd: 0.0,
    };

    /// Builds an input clamped to the bounds in `params`.
    pub fn clamped(v_cmd: f64, omega_cmd: f64, params: &RobotParams) -> Self {
        Self {
            v_cmd: v_cmd.clamp(params.v_min, params.v_max),
            omega_cmd: omega_cmd.clamp(-params.omega_max, params.omega_max),
        }
    }

    /// Unchecked constructor; callers must clamp before stepping.
    pub fn raw(v_cmd: f64, omega_cmd: f64) -> Self {
        Self { v_cmd, omega_cmd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub tau_v: f64,
    pub tau_omega: f64,
    pub dt: f64,
    pub radius: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 2.0,
            omega_max: 2.0,
            tau_v: 0.3,
            tau_omega: 0.3,
            dt: 0.2,
            radius: 0.4,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("dt", self.dt),
            ("tau_v", self.tau_v),
            ("tau_omega", self.tau_omega),
            ("radius", self.radius),
            ("omega_max", self.omega_max),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::invalid(field, "must be positive and finite"));
            }
        }
        if !(self.v_min <= self.v_max) {
            return Err(ConfigError::invalid("v_min", "must not exceed v_max"));
        }
        Ok(())
    }

    /// Same params with a different integration step.
    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Advances the robot by one step of `params.dt`.
pub fn step(state: &RobotState, input: &ControlInput, params: &RobotParams) -> RobotState {
    let dt = params.dt;
    let v = (state.v + dt / params.tau_v * (input.v_cmd - state.v)).clamp(params.v_min, params.v_max);
    let omega = (state.omega + dt / params.tau_omega * (input.omega_cmd - state.omega))
        .clamp(-params.omega_max, params.omega_max);
    let (sin, cos) = state.psi.sin_cos();
    RobotState {
        x: state.x + v * cos * dt,
        y: state.y + v * sin * dt,
        psi: wrap_angle(state.psi + omega * dt),
        v,
        omega,
    }
}

/// Rolls out `inputs` from `state0`. Element `t` is the state after `t + 1`
/// steps; the initial state is not included.
pub fn rollout(state0: &RobotState, inputs: &[ControlInput], params: &RobotParams) -> Vec<RobotState> {
    let mut out = Vec::with_capacity(inputs.len());
    rollout_into(state0, inputs, params, &mut out);
    out
}

/// Allocation-free variant of [`rollout`]; `out` is cleared first.
pub fn rollout_into(
    state0: &RobotState,
    inputs: &[ControlInput],
    params: &RobotParams,
    out: &mut Vec<RobotState>,
) {
    out.clear();
    let mut state = *state0;
    for input in inputs {
        state = step(&state, input, params);
        out.push(state);
    }
}
