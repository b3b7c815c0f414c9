use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{LateralBand, NoiseParams, ObstacleState, WalkerMode};

fn noise_sample<R: Rng + ?Sized>(sigma_w: f64, rng: &mut R) -> Vector2<f64> {
    if sigma_w == 0.0 {
        return Vector2::zeros();
    }
    let wx: f64 = rng.sample(StandardNormal);
    let wy: f64 = rng.sample(StandardNormal);
    Vector2::new(wx, wy) * sigma_w
}

/// Constant-velocity walker with additive Gaussian velocity noise:
/// `position += (velocity + w) * dt`, `w ~ N(0, sigma_w^2 I)`.
pub fn gaussian_walker_step<R: Rng + ?Sized>(
    state: &ObstacleState,
    noise: &NoiseParams,
    dt: f64,
    rng: &mut R,
) -> ObstacleState {
    let w = noise_sample(noise.sigma_w, rng);
    ObstacleState {
        position: state.position + (state.velocity + w) * dt,
        ..*state
    }
}

/// Velocity `B v` for a walker with preferred speed `speed`.
pub(crate) fn walker_velocity(mode: WalkerMode, heading_sign: f64, speed: f64) -> Vector2<f64> {
    match mode {
        WalkerMode::Horizontal => Vector2::new(heading_sign * speed, 0.0),
        WalkerMode::Diagonal { lateral_sign } => {
            Vector2::new(heading_sign * speed, lateral_sign * speed) * FRAC_1_SQRT_2
        }
    }
}

/// Lateral sign pointing away from the nearest wall of `band`.
pub(crate) fn inward_sign(y: f64, band: &LateralBand) -> f64 {
    if y <= band.center() {
        1.0
    } else {
        -1.0
    }
}

/// One opportunity of the horizontal-to-diagonal transition. The diagonal
/// state is absorbing. No randomness is consumed when the outcome is certain.
pub fn try_switch<R: Rng + ?Sized>(
    state: &ObstacleState,
    p_switch: f64,
    band: &LateralBand,
    rng: &mut R,
) -> ObstacleState {
    if state.mode != WalkerMode::Horizontal || p_switch <= 0.0 {
        return *state;
    }
    let switch = p_switch >= 1.0 || rng.random::<f64>() < p_switch;
    if !switch {
        return *state;
    }
    let mode = WalkerMode::Diagonal {
        lateral_sign: inward_sign(state.position.y, band),
    };
    ObstacleState {
        mode,
        velocity: walker_velocity(mode, state.heading_sign(), state.velocity.norm()),
        ..*state
    }
}

/// Markov-chain walker: a switch opportunity, then the noisy walker motion
/// along `B v`, then reflection at the walls of `band`.
pub fn markov_walker_step<R: Rng + ?Sized>(
    state: &ObstacleState,
    noise: &NoiseParams,
    dt: f64,
    band: &LateralBand,
    rng: &mut R,
) -> ObstacleState {
    let switched = try_switch(state, noise.p_switch, band, rng);
    let moved = gaussian_walker_step(&switched, noise, dt, rng);
    reflect(&moved, band)
}

pub(crate) fn reflect(state: &ObstacleState, band: &LateralBand) -> ObstacleState {
    let (y, flipped) = band.fold(state.position.y);
    let mut out = *state;
    out.position.y = y;
    if flipped {
        out.velocity.y = -out.velocity.y;
        if let WalkerMode::Diagonal { lateral_sign } = out.mode {
            out.mode = WalkerMode::Diagonal {
                lateral_sign: -lateral_sign,
            };
        }
    }
    out
}
