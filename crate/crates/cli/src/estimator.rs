//! Accuracy check of the shared-sample estimator against quadrature on
//! randomized mixture scenes.

use std::f64::consts::TAU;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskmppi::obstacles::{GaussianMode, ObstaclePrediction};
use riskmppi::risk::{build_region, build_risk_field, estimate_joint_cp, quadrature_cp, RiskParams};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub scenes: usize,
    pub n_mc: usize,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    /// Scenes where the oracle is at or above the threshold.
    pub at_or_above_threshold: usize,
    /// Estimate below the threshold while the oracle is at or above it.
    pub misclassified: usize,
    /// `misclassified` over all scenes.
    pub misclassification_rate: f64,
    /// `misclassified` over the scenes at or above the threshold.
    pub miss_rate_above_threshold: f64,
}

/// One random scene: 1 to 12 obstacles with 1 to 4 isotropic modes each,
/// standard deviations in [0.05, 0.5] m and means within 3 m of the query.
/// The sampling region is the box around a random cloud of rollout-like
/// positions that contains the query.
pub struct Scene {
    pub query: Vector2<f64>,
    pub predictions: Vec<ObstaclePrediction>,
    pub positions: Vec<Vector2<f64>>,
}

pub fn random_scene<R: Rng + ?Sized>(rng: &mut R, params: &RiskParams) -> Scene {
    let query = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let n_obstacles = rng.random_range(1..=12);
    // combined radius r is split between robot and obstacle
    let obstacle_radius = 0.5 * params.r;
    let predictions = (0..n_obstacles)
        .map(|_| {
            let n_modes = rng.random_range(1..=4);
            let raw: Vec<f64> = (0..n_modes).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let modes = raw
                .iter()
                .map(|w| {
                    let d = 3.0 * rng.random::<f64>().sqrt();
                    let a = rng.random_range(0.0..TAU);
                    let std: f64 = rng.random_range(0.05..=0.5);
                    let mean = query + Vector2::new(d * a.cos(), d * a.sin());
                    GaussianMode::isotropic(mean, std * std, w / total).expect("valid mode")
                })
                .collect();
            ObstaclePrediction::new(obstacle_radius, vec![modes]).expect("valid prediction")
        })
        .collect();
    let spread = Vector2::new(rng.random_range(0.0..3.0), rng.random_range(0.0..2.0));
    let positions = (0..40)
        .map(|_| {
            query
                + Vector2::new(
                    spread.x * rng.random_range(-1.0..1.0),
                    spread.y * rng.random_range(-1.0..1.0),
                )
        })
        .chain(std::iter::once(query))
        .collect();
    Scene {
        query,
        predictions,
        positions,
    }
}

/// Estimate and oracle for one scene.
pub fn evaluate_scene<R: Rng + ?Sized>(scene: &Scene, params: &RiskParams, rng: &mut R) -> (f64, f64) {
    let region = build_region(&scene.positions, params.r);
    let field = build_risk_field(region, &scene.predictions, 0, params, rng);
    let estimate = estimate_joint_cp(&scene.query, &field, params);
    let oracle = quadrature_cp(&scene.query, &scene.predictions, 0, params.r, params.r / 50.0);
    (estimate, oracle)
}

pub fn validate_estimator(n_scenes: usize, seed: u64, params: &RiskParams) -> EstimatorReport {
    assert!(n_scenes >= 1, "need at least one scene");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum_err = 0.0;
    let mut max_err = 0.0f64;
    let mut above = 0;
    let mut misclassified = 0;
    for _ in 0..n_scenes {
        let scene = random_scene(&mut rng, params);
        let (estimate, oracle) = evaluate_scene(&scene, params, &mut rng);
        let err = (estimate - oracle).abs();
        sum_err += err;
        max_err = max_err.max(err);
        if oracle >= params.sigma_threshold {
            above += 1;
            if estimate < params.sigma_threshold {
                misclassified += 1;
            }
        }
    }
    EstimatorReport {
        scenes: n_scenes,
        n_mc: params.n_mc,
        mean_abs_error: sum_err / n_scenes as f64,
        max_abs_error: max_err,
        at_or_above_threshold: above,
        misclassified,
        misclassification_rate: misclassified as f64 / n_scenes as f64,
        miss_rate_above_threshold: if above == 0 {
            0.0
        } else {
            misclassified as f64 / above as f64
        },
    }
}

impl std::fmt::Display for EstimatorReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scenes                 {}", self.scenes)?;
        writeln!(f, "n_mc                   {}", self.n_mc)?;
        writeln!(f, "mean |error|           {:.5}", self.mean_abs_error)?;
        writeln!(f, "max |error|            {:.5}", self.max_abs_error)?;
        writeln!(f, "oracle >= threshold    {}", self.at_or_above_threshold)?;
        writeln!(f, "missed                 {}", self.misclassified)?;
        writeln!(f, "misclassification rate {:.4}", self.misclassification_rate)?;
        write!(f, "miss rate given above  {:.4}", self.miss_rate_above_threshold)
    }
}
