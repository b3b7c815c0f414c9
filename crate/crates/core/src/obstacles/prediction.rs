//! Planner-side forecasts.

use nalgebra::{Matrix2, Vector2};

use super::walkers::{inward_sign, walker_velocity};
use super::{GaussianMode, LateralBand, NoiseParams, ObstaclePrediction, ObstacleState, WalkerMode};

/// Smallest per-axis variance (m^2) of any forecast mode.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Accumulated position covariance after `t` steps of independent velocity
/// noise, floored at [`COVARIANCE_FLOOR`].
fn propagated_covariance(noise: &NoiseParams, t: usize, dt: f64) -> Matrix2<f64> {
    let var = t as f64 * dt * dt * noise.sigma_w * noise.sigma_w;
    Matrix2::identity() * var.max(COVARIANCE_FLOOR)
}

fn mode(mean: Vector2<f64>, cov: Matrix2<f64>, weight: f64) -> GaussianMode {
    GaussianMode {
        mean,
        covariance: cov,
        weight,
    }
}

/// Single-mode forecast assuming the current velocity is held.
pub fn predict_constant_velocity(
    state: &ObstacleState,
    noise: &NoiseParams,
    horizon: usize,
    dt: f64,
) -> ObstaclePrediction {
    assert!(horizon >= 1, "horizon must be at least one step");
    let steps = (1..=horizon)
        .map(|t| {
            let mean = state.position + state.velocity * (t as f64 * dt);
            vec![mode(mean, propagated_covariance(noise, t, dt), 1.0)]
        })
        .collect();
    ObstaclePrediction::new(state.radius, steps).expect("constant-velocity forecast is well formed")
}

/// Mean path of a walker that is in `mode` from the start, or switches to
/// diagonal after `switch_at` steps. Reflects off the band walls.
fn walker_mean_path(
    state: &ObstacleState,
    horizon: usize,
    dt: f64,
    switch_at: Option<usize>,
    band: Option<&LateralBand>,
) -> Vec<Vector2<f64>> {
    let speed = state.velocity.norm();
    let heading = state.heading_sign();
    let mut mode = state.mode;
    let mut pos = state.position;
    let mut vel = walker_velocity(mode, heading, speed);
    let mut path = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        if mode == WalkerMode::Horizontal && switch_at == Some(t - 1) {
            let lateral_sign = match band {
                Some(b) => inward_sign(pos.y, b),
                None => 1.0,
            };
            mode = WalkerMode::Diagonal { lateral_sign };
            vel = walker_velocity(mode, heading, speed);
        }
        pos += vel * dt;
        if let Some(b) = band {
            let (y, flipped) = b.fold(pos.y);
            pos.y = y;
            if flipped {
                vel.y = -vel.y;
            }
        }
        path.push(pos);
    }
    path
}

/// Mixture forecast for a Markov-chain walker.
///
/// A horizontal walker gets one mode per switch opportunity (at every
/// multiple of `block_len` strictly inside the horizon) plus a
/// never-switching mode. The probability of a switch within one block,
/// `q = 1 - (1 - p_switch)^block_len`, is attributed to the block's
/// boundary, so the weights are geometric: `q, (1-q) q, ..., (1-q)^n`.
/// A walker that is already diagonal yields a single mode.
pub fn predict_markov_mog(
    state: &ObstacleState,
    noise: &NoiseParams,
    horizon: usize,
    dt: f64,
    band: Option<&LateralBand>,
) -> ObstaclePrediction {
    assert!(horizon >= 1, "horizon must be at least one step");
    let covs: Vec<_> = (1..=horizon).map(|t| propagated_covariance(noise, t, dt)).collect();

    let mut paths: Vec<(Vec<Vector2<f64>>, f64)> = Vec::new();
    if state.mode == WalkerMode::Horizontal {
        let q = 1.0 - (1.0 - noise.p_switch).powi(noise.block_len as i32);
        let mut remaining = 1.0;
        let mut switch_at = noise.block_len;
        while switch_at < horizon {
            paths.push((walker_mean_path(state, horizon, dt, Some(switch_at), band), remaining * q));
            remaining *= 1.0 - q;
            switch_at += noise.block_len;
        }
        paths.push((walker_mean_path(state, horizon, dt, None, band), remaining));
    } else {
        paths.push((walker_mean_path(state, horizon, dt, None, band), 1.0));
    }

    let steps = (0..horizon)
        .map(|t| paths.iter().map(|(path, w)| mode(path[t], covs[t], *w)).collect())
        .collect();
    ObstaclePrediction::new(state.radius, steps).expect("mixture forecast is well formed")
}

/// Deterministic reduction: each step keeps only the mean of its dominant
/// mode, with the floor covariance.
pub fn reduce_to_means(prediction: &ObstaclePrediction) -> ObstaclePrediction {
    let floor = Matrix2::identity() * COVARIANCE_FLOOR;
    let steps = (0..prediction.horizon())
        .map(|t| vec![mode(prediction.dominant_mean(t), floor, 1.0)])
        .collect();
    ObstaclePrediction::new(prediction.radius, steps).expect("reduced forecast is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn walker(y: f64) -> ObstacleState {
        ObstacleState::new(Vector2::new(5.0, y), Vector2::new(1.3, 0.0), 0.3, Vector2::new(35.0, y))
    }

    #[test]
    fn constant_velocity_mean_and_covariance() {
        let s = ObstacleState::new(Vector2::zeros(), Vector2::new(1.0, 0.0), 0.3, Vector2::new(10.0, 0.0));
        let p = predict_constant_velocity(&s, &NoiseParams::default(), 20, 0.2);
        assert_eq!(p.horizon(), 20);
        assert_eq!(p.n_modes(), 1);
        // t = 5 is index 4
        assert_relative_eq!(p.modes(4)[0].mean, Vector2::new(1.0, 0.0), epsilon = 1e-12);
        // 20 increments of variance 0.2^2 * 0.3^2
        let last = p.modes(19)[0].covariance;
        assert_relative_eq!(last[(0, 0)], 0.072, epsilon = 1e-12);
        assert_relative_eq!(last[(1, 1)], 0.072, epsilon = 1e-12);
        assert_eq!(last[(0, 1)], 0.0);
    }

    #[test]
    fn noise_free_forecast_is_floored() {
        let noise = NoiseParams {
            sigma_w: 0.0,
            ..NoiseParams::default()
        };
        let s = walker(0.0);
        let p = predict_constant_velocity(&s, &noise, 10, 0.2);
        for t in 0..10 {
            let m = p.modes(t)[0];
            assert_eq!(m.covariance, Matrix2::identity() * COVARIANCE_FLOOR);
            assert_relative_eq!(m.mean.y, 0.0);
            assert_relative_eq!(m.mean.x, 5.0 + 1.3 * 0.2 * (t + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn markov_weights_follow_block_aggregation() {
        let noise = NoiseParams::default();
        let p = predict_markov_mog(&walker(1.0), &noise, 20, 0.2, None);
        assert_eq!(p.n_modes(), 4);
        let q: f64 = 1.0 - 0.975f64.powi(5);
        assert_relative_eq!(q, 0.118905, epsilon = 1e-6);
        let w: Vec<f64> = p.modes(0).iter().map(|m| m.weight).collect();
        let expected = [0.11890, 0.10477, 0.09231, 0.68402];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-5, "{w:?}");
        }
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn markov_without_switching_matches_constant_velocity() {
        let noise = NoiseParams {
            p_switch: 0.0,
            ..NoiseParams::default()
        };
        let s = walker(0.5);
        let mog = predict_markov_mog(&s, &noise, 20, 0.2, None);
        let cv = predict_constant_velocity(&s, &noise, 20, 0.2);
        let w: Vec<f64> = mog.modes(0).iter().map(|m| m.weight).collect();
        assert_eq!(w, vec![0.0, 0.0, 0.0, 1.0]);
        for t in 0..20 {
            for pt in [Vector2::new(6.0, 0.5), Vector2::new(8.0, 1.0), s.position] {
                assert_relative_eq!(mog.density(t, &pt), cv.density(t, &pt), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn switched_modes_diverge_after_their_switch_step() {
        let band = LateralBand::new(-2.7, 2.7);
        let p = predict_markov_mog(&walker(1.0), &NoiseParams::default(), 20, 0.2, Some(&band));
        // step index 4 is t = 5: nobody has switched yet
        for t in 0..5 {
            let first = p.modes(t)[0].mean;
            assert!(p.modes(t).iter().all(|m| (m.mean - first).norm() < 1e-12));
        }
        // the switch-at-5 mode heads toward the centerline afterwards
        assert!(p.modes(5)[0].mean.y < 1.0);
        assert_relative_eq!(p.modes(5)[3].mean.y, 1.0);
    }

    #[test]
    fn diagonal_walker_has_one_mode() {
        let mut s = walker(-1.0);
        s.mode = WalkerMode::Diagonal { lateral_sign: 1.0 };
        s.velocity = walker_velocity(s.mode, 1.0, 1.3);
        let p = predict_markov_mog(&s, &NoiseParams::default(), 20, 0.2, None);
        assert_eq!(p.n_modes(), 1);
        assert!(p.modes(19)[0].mean.y > -1.0);
    }

    #[test]
    fn reduce_keeps_dominant_mean() {
        let p = predict_markov_mog(&walker(1.0), &NoiseParams::default(), 20, 0.2, None);
        let r = reduce_to_means(&p);
        assert_eq!(r.n_modes(), 1);
        for t in 0..20 {
            assert_eq!(r.modes(t)[0].mean, p.modes(t)[3].mean);
        }
    }

    proptest! {
        #[test]
        fn forecasts_are_valid_and_growing(
            p_switch in 0.0f64..=1.0,
            sigma_w in 0.0f64..1.0,
            block_len in 1usize..8,
            horizon in 1usize..30,
            y in -2.5f64..2.5,
        ) {
            let noise = NoiseParams { sigma_w, p_switch, block_len };
            let band = LateralBand::new(-2.7, 2.7);
            let s = walker(y);
            let mog = predict_markov_mog(&s, &noise, horizon, 0.2, Some(&band));
            prop_assert!(mog.validate().is_ok());
            let cv = predict_constant_velocity(&s, &noise, horizon, 0.2);
            prop_assert!(cv.validate().is_ok());
            for t in 1..horizon {
                // isotropic, so Loewner order reduces to the diagonal entry
                prop_assert!(cv.modes(t)[0].covariance[(0, 0)] >= cv.modes(t - 1)[0].covariance[(0, 0)]);
            }
        }
    }
}
