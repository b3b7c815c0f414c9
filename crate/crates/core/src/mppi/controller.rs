use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{stage_cost, tracking_cost, CostWeights, ReferencePath};
use super::sampling::sample_halton_splines;
use super::weights::{importance_sampling, update_beta};
use super::MppiParams;
use crate::dynamics::{rollout, ControlInput, RobotParams, RobotState};
use crate::error::ConfigError;
use crate::obstacles::ObstaclePrediction;
use crate::risk::{build_region, build_risk_field, estimate_joint_cp, RiskField, RiskParams};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub robot: RobotParams,
    pub mppi: MppiParams,
    pub weights: CostWeights,
    pub risk: RiskParams,
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.robot.validate().map_err(|e| e.within("robot"))?;
        self.mppi.validate().map_err(|e| e.within("mppi"))?;
        self.weights.validate().map_err(|e| e.within("mppi"))?;
        self.risk.validate().map_err(|e| e.within("risk"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Minimum rollout cost.
    pub rho: f64,
    /// Normalization sum of the importance weights.
    pub eta: f64,
    /// Temperature used for this plan.
    pub beta: f64,
    /// Temperature for the next plan.
    pub beta_next: f64,
    /// Rollouts with at least one step at or above the risk threshold.
    pub rejected: usize,
    /// Weight of the zero-velocity rollout.
    pub braking_weight: f64,
    pub max_weight: f64,
    pub risk_evaluated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub optimal_inputs: Vec<ControlInput>,
    pub planned_states: Vec<RobotState>,
    pub planned_risk: Vec<f64>,
    /// `optimal_inputs` advanced by one step, last input repeated.
    pub next_warm_start: Vec<ControlInput>,
    pub diagnostics: Diagnostics,
}

/// One sampled input sequence and what it led to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub inputs: Vec<ControlInput>,
    pub states: Vec<RobotState>,
    pub risk: Vec<f64>,
    pub cost: f64,
    pub weight: f64,
}

fn validate_predictions(predictions: &[ObstaclePrediction], horizon: usize) -> Result<(), ConfigError> {
    for (o, p) in predictions.iter().enumerate() {
        p.validate().map_err(|e| e.within(&format!("predictions[{o}]")))?;
        if p.horizon() < horizon {
            return Err(ConfigError::invalid(
                format!("predictions[{o}]"),
                format!("covers {} steps, planner needs {horizon}", p.horizon()),
            ));
        }
    }
    Ok(())
}

fn risk_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7269_736b_6669_656c);
    rng.set_stream(t as u64);
    rng
}

/// One DRA-MPPI iteration. Index 0 of the returned rollouts is the
/// zero-velocity sample.
pub fn plan_with_rollouts(
    state0: &RobotState,
    predictions: &[ObstaclePrediction],
    reference: &ReferencePath,
    warm_start: &[ControlInput],
    beta: f64,
    config: &PlannerConfig,
    seed: u64,
) -> Result<(PlannerOutput, Vec<Rollout>), ConfigError> {
    let horizon = config.mppi.horizon;
    validate_predictions(predictions, horizon)?;
    if warm_start.len() != horizon {
        return Err(ConfigError::invalid("warm_start", "length differs from the horizon"));
    }
    let robot = &config.robot;
    let weights = &config.weights;
    let r = config.risk.r;

    let mut inputs: Vec<Vec<ControlInput>> = Vec::with_capacity(config.mppi.samples);
    inputs.push(vec![ControlInput::ZERO; horizon]);
    for e in sample_halton_splines(&config.mppi, seed) {
        inputs.push(
            warm_start
                .iter()
                .zip(&e)
                .map(|(u, d)| ControlInput::clamped(u.v_cmd + d[0], u.omega_cmd + d[1], robot))
                .collect(),
        );
    }
    let states: Vec<Vec<RobotState>> = inputs.par_iter().map(|v| rollout(state0, v, robot)).collect();

    let evaluate_risk = weights.risk_enabled() && !predictions.is_empty();
    let mut fields: Vec<RiskField> = Vec::new();
    let mut risk = vec![vec![0.0; horizon]; inputs.len()];
    if evaluate_risk {
        let mut positions = vec![Vector2::zeros(); inputs.len()];
        for t in 0..horizon {
            for (k, xs) in states.iter().enumerate() {
                positions[k] = xs[t].position();
            }
            let region = build_region(&positions, r);
            let field = build_risk_field(region, predictions, t, &config.risk, &mut risk_rng(seed, t));
            let cps: Vec<f64> = positions
                .par_iter()
                .map(|p| estimate_joint_cp(p, &field, &config.risk))
                .collect();
            for (k, cp) in cps.into_iter().enumerate() {
                risk[k][t] = cp;
            }
            fields.push(field);
        }
    }

    let stages = reference.stages(state0, horizon, robot.dt);
    let means: Vec<Vec<Vector2<f64>>> = (0..horizon)
        .map(|t| predictions.iter().map(|p| p.dominant_mean(t)).collect())
        .collect();
    let costs: Vec<f64> = states
        .par_iter()
        .zip(risk.par_iter())
        .map(|(xs, ps)| {
            let mut cost = 0.0;
            for t in 0..horizon {
                cost += stage_cost(&xs[t], ps[t], &stages[t], weights);
                if weights.w_collision > 0.0 {
                    let p = xs[t].position();
                    if means[t].iter().any(|m| (m - p).norm_squared() < r * r) {
                        cost += weights.w_collision;
                    }
                }
            }
            cost + tracking_cost(&xs[horizon - 1], &stages[horizon - 1], weights)
        })
        .collect();

    let is = importance_sampling(&costs, beta);
    let mut optimal_inputs = vec![ControlInput::ZERO; horizon];
    for (v, w) in inputs.iter().zip(&is.weights) {
        for (acc, u) in optimal_inputs.iter_mut().zip(v) {
            acc.v_cmd += w * u.v_cmd;
            acc.omega_cmd += w * u.omega_cmd;
        }
    }
    for u in optimal_inputs.iter_mut() {
        *u = ControlInput::clamped(u.v_cmd, u.omega_cmd, robot);
    }
    let planned_states = rollout(state0, &optimal_inputs, robot);
    let planned_risk = if evaluate_risk {
        planned_states
            .iter()
            .zip(&fields)
            .map(|(s, f)| estimate_joint_cp(&s.position(), f, &config.risk))
            .collect()
    } else {
        vec![0.0; horizon]
    };

    let threshold = weights.sigma_threshold;
    let rejected = risk.iter().filter(|ps| ps.iter().any(|&p| p >= threshold)).count();
    let mut next_warm_start: Vec<ControlInput> = optimal_inputs[1..].to_vec();
    next_warm_start.push(*optimal_inputs.last().expect("non-empty horizon"));

    let diagnostics = Diagnostics {
        rho: is.rho,
        eta: is.eta,
        beta,
        beta_next: update_beta(beta, is.eta, &config.mppi),
        rejected,
        braking_weight: is.weights[0],
        max_weight: is.weights.iter().cloned().fold(0.0, f64::max),
        risk_evaluated: evaluate_risk,
    };
    let rollouts = inputs
        .into_iter()
        .zip(states)
        .zip(risk)
        .zip(costs.iter().zip(&is.weights))
        .map(|(((inputs, states), risk), (&cost, &weight))| Rollout {
            inputs,
            states,
            risk,
            cost,
            weight,
        })
        .collect();
    Ok((
        PlannerOutput {
            optimal_inputs,
            planned_states,
            planned_risk,
            next_warm_start,
            diagnostics,
        },
        rollouts,
    ))
}

/// One DRA-MPPI iteration; see [`plan_with_rollouts`].
pub fn plan(
    state0: &RobotState,
    predictions: &[ObstaclePrediction],
    reference: &ReferencePath,
    warm_start: &[ControlInput],
    beta: f64,
    config: &PlannerConfig,
    seed: u64,
) -> Result<PlannerOutput, ConfigError> {
    plan_with_rollouts(state0, predictions, reference, warm_start, beta, config, seed).map(|(out, _)| out)
}

/// Receding-horizon wrapper that carries the warm start and temperature
/// between iterations. Drive it from one caller at a time.
#[derive(Debug, Clone)]
pub struct Controller {
    config: PlannerConfig,
    warm_start: Vec<ControlInput>,
    beta: f64,
    seed: u64,
    iteration: u64,
}

impl Controller {
    pub fn new(config: PlannerConfig, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            warm_start: vec![ControlInput::ZERO; config.mppi.horizon],
            beta: config.mppi.beta_init,
            config,
            seed,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn warm_start(&self) -> &[ControlInput] {
        &self.warm_start
    }

    pub fn set_warm_start(&mut self, warm_start: Vec<ControlInput>) {
        assert_eq!(warm_start.len(), self.config.mppi.horizon);
        self.warm_start = warm_start;
    }

    fn next_seed(&mut self) -> u64 {
        let s = self
            .seed
            .wrapping_mul(0x2545_F491_4F6C_DD1D)
            .wrapping_add(self.iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.iteration += 1;
        s
    }

    pub fn step(
        &mut self,
        state0: &RobotState,
        predictions: &[ObstaclePrediction],
        reference: &ReferencePath,
    ) -> Result<PlannerOutput, ConfigError> {
        self.step_with_rollouts(state0, predictions, reference).map(|(out, _)| out)
    }

    pub fn step_with_rollouts(
        &mut self,
        state0: &RobotState,
        predictions: &[ObstaclePrediction],
        reference: &ReferencePath,
    ) -> Result<(PlannerOutput, Vec<Rollout>), ConfigError> {
        let seed = self.next_seed();
        let (out, rollouts) = plan_with_rollouts(
            state0,
            predictions,
            reference,
            &self.warm_start,
            self.beta,
            &self.config,
            seed,
        )?;
        self.beta = out.diagnostics.beta_next;
        self.warm_start = out.next_warm_start.clone();
        Ok((out, rollouts))
    }
}
