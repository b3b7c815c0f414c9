use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, EpisodeOutcome, PedestrianModel, PlannerSetup, Scenario};
use crate::error::ConfigError;

/// Summary of one planner configuration over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub config: String,
    pub n_pedestrians: usize,
    pub pedestrian_model: PedestrianModel,
    pub trials: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    pub duration_mean: f64,
    pub duration_std: f64,
    pub velocity_mean: f64,
    pub velocity_std: f64,
    pub max_cp_mean: f64,
    pub max_cp_std: f64,
    /// Wall-clock plan time over every controller tick of the batch (ms).
    pub runtime_ms_mean: f64,
    pub runtime_ms_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub row: AggregateRow,
    pub episodes: Vec<EpisodeOutcome>,
}

/// Mean and population standard deviation.
fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn aggregate(config: &str, scenario: &Scenario, episodes: &[EpisodeOutcome]) -> AggregateRow {
    let records: Vec<_> = episodes.iter().map(|e| &e.record).collect();
    let (duration_mean, duration_std) = mean_std(records.iter().map(|r| r.task_duration));
    let (velocity_mean, velocity_std) = mean_std(records.iter().map(|r| r.mean_velocity));
    let (max_cp_mean, max_cp_std) = mean_std(records.iter().map(|r| r.max_posteriori_cp));
    let (runtime_ms_mean, runtime_ms_std) = mean_std(episodes.iter().flat_map(|e| e.trace.plan_times_ms()));
    let successes = records.iter().filter(|r| r.success()).count();
    AggregateRow {
        config: config.to_string(),
        n_pedestrians: scenario.n_pedestrians,
        pedestrian_model: scenario.pedestrian_model,
        trials: records.len(),
        successes,
        collisions: records.iter().filter(|r| r.collided).count(),
        timeouts: records.iter().filter(|r| r.timed_out).count(),
        success_rate: if records.is_empty() {
            0.0
        } else {
            successes as f64 / records.len() as f64
        },
        duration_mean,
        duration_std,
        velocity_mean,
        velocity_std,
        max_cp_mean,
        max_cp_std,
        runtime_ms_mean,
        runtime_ms_std,
    }
}

/// Runs `n_trials` episodes per setup with seeds `scenario.seed + i`.
/// Trials run in parallel; each episode is single-threaded apart from the
/// planner's own data parallelism.
pub fn run_batch(scenario: &Scenario, n_trials: usize, setups: &[PlannerSetup]) -> Result<Vec<BatchResult>, ConfigError> {
    if n_trials < 1 {
        return Err(ConfigError::invalid("trials", "must be at least 1"));
    }
    setups
        .iter()
        .map(|setup| {
            let episodes = (0..n_trials as u64)
                .into_par_iter()
                .map(|i| {
                    let s = Scenario {
                        seed: scenario.seed.wrapping_add(i),
                        ..*scenario
                    };
                    run_episode(&s, setup)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(BatchResult {
                row: aggregate(&setup.name, scenario, &episodes),
                episodes,
            })
        })
        .collect()
}
