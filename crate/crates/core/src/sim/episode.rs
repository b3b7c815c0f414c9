use std::time::Instant;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PedestrianModel, PlannerSetup, PredictionModes, Scenario};
use crate::dynamics::{step, ControlInput, RobotState};
use crate::error::ConfigError;
use crate::mppi::{Controller, Diagnostics};
use crate::obstacles::{
    markov_walker_step, predict_constant_velocity, predict_markov_mog, reduce_to_means, reflect,
    social_forces_step, NoiseParams, ObstaclePrediction, ObstacleState, SocialForceParams,
};
use crate::risk::quadrature_cp;

/// Metrics of one episode. Everything here is recomputable from the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub seed: u64,
    /// Time of arrival, collision or timeout (s).
    pub task_duration: f64,
    /// Path length over task duration (m/s).
    pub mean_velocity: f64,
    pub path_length: f64,
    /// Largest a-posteriori collision probability over controller ticks.
    pub max_posteriori_cp: f64,
    pub collided: bool,
    pub reached_goal: bool,
    /// Neither goal nor collision before the time limit.
    pub timed_out: bool,
    pub controller_ticks: usize,
}

impl ExperimentRecord {
    pub fn success(&self) -> bool {
        self.reached_goal && !self.collided
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerTick {
    pub posteriori_cp: f64,
    /// Wall-clock time of the plan call (ms).
    pub plan_ms: f64,
    pub optimal_inputs: Vec<ControlInput>,
    pub planned_states: Vec<RobotState>,
    pub planned_risk: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// State after one sim tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub time: f64,
    /// Input held during this tick.
    pub input: ControlInput,
    pub robot: RobotState,
    pub pedestrians: Vec<ObstacleState>,
    /// Present on ticks that started with a plan call.
    pub controller: Option<ControllerTick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub robot_radius: f64,
    pub goal_x: f64,
    pub timeout: f64,
    pub initial_robot: RobotState,
    pub initial_pedestrians: Vec<ObstacleState>,
    pub ticks: Vec<TickRecord>,
}

impl EpisodeTrace {
    pub fn plan_times_ms(&self) -> impl Iterator<Item = f64> + '_ {
        self.ticks.iter().filter_map(|t| t.controller.as_ref().map(|c| c.plan_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub record: ExperimentRecord,
    pub trace: EpisodeTrace,
}

fn collides(robot: &RobotState, robot_radius: f64, pedestrians: &[ObstacleState]) -> bool {
    let p = robot.position();
    pedestrians
        .iter()
        .any(|o| (o.position - p).norm() < robot_radius + o.radius)
}

/// Recomputes the episode metrics from a trace.
pub fn metrics_from_trace(trace: &EpisodeTrace) -> ExperimentRecord {
    let mut path_length = 0.0;
    let mut prev = trace.initial_robot.position();
    let mut collided = false;
    let mut max_cp = 0.0f64;
    let mut controller_ticks = 0;
    for t in &trace.ticks {
        let p = t.robot.position();
        path_length += (p - prev).norm();
        prev = p;
        collided |= collides(&t.robot, trace.robot_radius, &t.pedestrians);
        if let Some(c) = &t.controller {
            max_cp = max_cp.max(c.posteriori_cp);
            controller_ticks += 1;
        }
    }
    let task_duration = trace.ticks.last().map_or(0.0, |t| t.time);
    let reached_goal = !collided && trace.ticks.last().is_some_and(|t| t.robot.x >= trace.goal_x);
    ExperimentRecord {
        seed: trace.seed,
        task_duration,
        mean_velocity: if task_duration > 0.0 { path_length / task_duration } else { 0.0 },
        path_length,
        max_posteriori_cp: max_cp,
        collided,
        reached_goal,
        timed_out: !collided && !reached_goal,
        controller_ticks,
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Crowd {
    agents: Vec<ObstacleState>,
    rngs: Vec<ChaCha8Rng>,
    spawn_rng: ChaCha8Rng,
}

impl Crowd {
    fn spawn(scenario: &Scenario) -> Self {
        let mut spawn_rng = ChaCha8Rng::seed_from_u64(mix(scenario.seed, 1));
        let band = scenario.pedestrian_band();
        let speed = scenario.social.preferred_speed;
        let agents = (0..scenario.n_pedestrians)
            .map(|i| {
                // even agents walk toward the robot, odd ones along with it
                let heading = if i % 2 == 0 { -1.0 } else { 1.0 };
                let x = spawn_rng.random_range(scenario.spawn_x_min..=scenario.corridor_length);
                let y = spawn_rng.random_range(band.lo..=band.hi);
                Self::agent(scenario, x, y, heading, speed)
            })
            .collect();
        let rngs = (0..scenario.n_pedestrians)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(scenario.seed, 2));
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        Self {
            agents,
            rngs,
            spawn_rng,
        }
    }

    fn agent(scenario: &Scenario, x: f64, y: f64, heading: f64, speed: f64) -> ObstacleState {
        let goal_x = if heading > 0.0 {
            scenario.corridor_length + 10.0 * scenario.corridor_width
        } else {
            -10.0 * scenario.corridor_width
        };
        ObstacleState::new(
            Vector2::new(x, y),
            Vector2::new(heading * speed, 0.0),
            scenario.pedestrian_radius,
            Vector2::new(goal_x, y),
        )
    }

    /// One sim tick. The velocity noise is scaled by `sqrt(period)` so that
    /// the displacement noise accumulated over one planner step has exactly
    /// the covariance the forecasts assume.
    fn advance(
        &mut self,
        scenario: &Scenario,
        social: &SocialForceParams,
        robot: &RobotState,
        period: usize,
        switch_opportunity: bool,
    ) {
        let dt = scenario.sim_dt;
        let band = scenario.pedestrian_band();
        let sigma = scenario.noise.sigma_w * (period as f64).sqrt();
        match scenario.pedestrian_model {
            PedestrianModel::Gaussian => {
                let next = social_forces_step(&self.agents, robot, dt, social);
                for ((agent, next), rng) in self.agents.iter_mut().zip(next).zip(&mut self.rngs) {
                    *agent = next;
                    if sigma > 0.0 {
                        let wx: f64 = rng.sample(StandardNormal);
                        let wy: f64 = rng.sample(StandardNormal);
                        agent.position += Vector2::new(wx, wy) * (sigma * dt);
                        *agent = reflect(agent, &band);
                    }
                }
            }
            PedestrianModel::Markov => {
                let noise = NoiseParams {
                    sigma_w: sigma,
                    p_switch: if switch_opportunity { scenario.noise.p_switch } else { 0.0 },
                    ..scenario.noise
                };
                for (agent, rng) in self.agents.iter_mut().zip(&mut self.rngs) {
                    *agent = markov_walker_step(agent, &noise, dt, &band, rng);
                }
            }
        }
        self.respawn(scenario);
    }

    /// Agents that walked past the far end re-enter at the near end.
    fn respawn(&mut self, scenario: &Scenario) {
        let lo = -scenario.respawn_margin;
        let hi = scenario.corridor_length + scenario.respawn_margin;
        let band = scenario.pedestrian_band();
        let speed = scenario.social.preferred_speed;
        for agent in self.agents.iter_mut() {
            let heading = agent.heading_sign();
            let x = if heading > 0.0 && agent.position.x > hi {
                lo
            } else if heading < 0.0 && agent.position.x < lo {
                hi
            } else {
                continue;
            };
            let y = self.spawn_rng.random_range(band.lo..=band.hi);
            *agent = Self::agent(scenario, x, y, heading, speed);
        }
    }

    fn predict(&self, scenario: &Scenario, horizon: usize, dt: f64) -> Vec<ObstaclePrediction> {
        let band = scenario.pedestrian_band();
        self.agents
            .iter()
            .map(|a| match scenario.pedestrian_model {
                PedestrianModel::Gaussian => predict_constant_velocity(a, &scenario.noise, horizon, dt),
                PedestrianModel::Markov => predict_markov_mog(a, &scenario.noise, horizon, dt, Some(&band)),
            })
            .collect()
    }
}

/// Runs one closed-loop episode. The planner seed is derived from the
/// scenario seed, so the record is a function of its inputs.
pub fn run_episode(scenario: &Scenario, setup: &PlannerSetup) -> Result<EpisodeOutcome, ConfigError> {
    let config = &setup.config;
    config.validate()?;
    scenario
        .validate(config.robot.radius)
        .map_err(|e| e.within("scenario"))?;
    let period = scenario.control_period(config.robot.dt)?;
    let sim_robot = config.robot.with_dt(scenario.sim_dt);
    let reference = scenario.reference(config.robot.radius);
    let social = SocialForceParams {
        robot_radius: config.robot.radius,
        walls: Some(scenario.walls()),
        ..scenario.social
    };
    let horizon = config.mppi.horizon;
    let r = config.risk.r;

    let mut controller = Controller::new(*config, mix(scenario.seed, 3))?;
    let mut crowd = Crowd::spawn(scenario);
    let mut robot = RobotState::at_rest(0.0, 0.0, 0.0);
    let mut input = ControlInput::ZERO;
    let mut previous: Option<Vec<ObstaclePrediction>> = None;

    let mut trace = EpisodeTrace {
        seed: scenario.seed,
        robot_radius: config.robot.radius,
        goal_x: scenario.corridor_length,
        timeout: scenario.timeout,
        initial_robot: robot,
        initial_pedestrians: crowd.agents.clone(),
        ticks: Vec::new(),
    };
    let max_ticks = (scenario.timeout / scenario.sim_dt).round() as usize;

    for tick in 0..max_ticks {
        let mut controller_tick = None;
        if tick % period == 0 {
            let full = crowd.predict(scenario, horizon, config.robot.dt);
            let current = previous.as_ref().unwrap_or(&full);
            let posteriori_cp = quadrature_cp(&robot.position(), current, 0, r, r / 50.0);
            let shown: Vec<ObstaclePrediction> = match setup.modes {
                PredictionModes::Full => full.clone(),
                PredictionModes::Mean => full.iter().map(reduce_to_means).collect(),
            };
            let start = Instant::now();
            let out = controller.step(&robot, &shown, &reference)?;
            let plan_ms = start.elapsed().as_secs_f64() * 1e3;
            input = out.optimal_inputs[0];
            controller_tick = Some(ControllerTick {
                posteriori_cp,
                plan_ms,
                optimal_inputs: out.optimal_inputs,
                planned_states: out.planned_states,
                planned_risk: out.planned_risk,
                diagnostics: out.diagnostics,
            });
            previous = Some(full);
        }
        let switch_opportunity = tick % period == period - 1;
        crowd.advance(scenario, &social, &robot, period, switch_opportunity);
        robot = step(&robot, &input, &sim_robot);
        trace.ticks.push(TickRecord {
            tick,
            time: (tick + 1) as f64 * scenario.sim_dt,
            input,
            robot,
            pedestrians: crowd.agents.clone(),
            controller: controller_tick,
        });
        if collides(&robot, config.robot.radius, &crowd.agents) || robot.x >= scenario.corridor_length {
            break;
        }
    }
    Ok(EpisodeOutcome {
        record: metrics_from_trace(&trace),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mppi::PlannerConfig;
    use crate::obstacles::WalkerMode;

    fn quick_config() -> PlannerConfig {
        let mut c = PlannerConfig::default();
        c.mppi.samples = 64;
        c.risk.n_mc = 2000;
        c
    }

    #[test]
    fn free_corridor_is_driven_at_the_reference_speed() {
        let scenario = Scenario {
            n_pedestrians: 0,
            ..Scenario::default()
        };
        let out = run_episode(&scenario, &PlannerSetup::dra(PlannerConfig::default())).unwrap();
        let rec = &out.record;
        assert!(rec.success(), "{rec:?}");
        let nominal = scenario.corridor_length / scenario.v_ref;
        assert!((rec.task_duration - nominal).abs() <= 0.1 * nominal, "{}", rec.task_duration);
        assert_eq!(rec.max_posteriori_cp, 0.0);
    }

    #[test]
    fn episodes_are_reproducible() {
        let scenario = Scenario {
            n_pedestrians: 4,
            seed: 11,
            timeout: 6.0,
            ..Scenario::default()
        };
        let setup = PlannerSetup::dra(quick_config());
        let a = run_episode(&scenario, &setup).unwrap();
        let b = run_episode(&scenario, &setup).unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.trace.ticks.len(), b.trace.ticks.len());
        for (x, y) in a.trace.ticks.iter().zip(&b.trace.ticks) {
            assert_eq!(x.robot, y.robot);
            assert_eq!(x.pedestrians, y.pedestrians);
        }
    }

    #[test]
    fn input_changes_only_at_controller_ticks() {
        let scenario = Scenario {
            seed: 5,
            timeout: 5.0,
            ..Scenario::default()
        };
        let out = run_episode(&scenario, &PlannerSetup::dra(quick_config())).unwrap();
        let mut held = ControlInput::ZERO;
        for t in &out.trace.ticks {
            if t.controller.is_some() {
                assert_eq!(t.tick % 4, 0);
                held = t.input;
            }
            assert_eq!(t.input, held);
        }
    }

    #[test]
    fn collision_flag_matches_the_tick_distances() {
        let scenario = Scenario {
            n_pedestrians: 0,
            timeout: 20.0,
            ..Scenario::default()
        };
        let mut out = run_episode(&scenario, &PlannerSetup::dra(quick_config())).unwrap();
        assert!(!out.record.collided);
        let t = out.trace.ticks.len() / 2;
        let p = out.trace.ticks[t].robot.position();
        out.trace.ticks[t].pedestrians.push(ObstacleState::new(
            p + Vector2::new(0.69, 0.0),
            Vector2::zeros(),
            0.3,
            p,
        ));
        let rec = metrics_from_trace(&out.trace);
        assert!(rec.collided && !rec.success());
        out.trace.ticks[t].pedestrians[0].position = p + Vector2::new(0.71, 0.0);
        assert!(!metrics_from_trace(&out.trace).collided);
    }

    #[test]
    fn timeout_is_a_failure_not_an_error() {
        let scenario = Scenario {
            n_pedestrians: 0,
            timeout: 3.0,
            ..Scenario::default()
        };
        let rec = run_episode(&scenario, &PlannerSetup::dra(quick_config())).unwrap().record;
        assert!(rec.timed_out && !rec.reached_goal && !rec.collided);
        assert!((rec.task_duration - 3.0).abs() < 1e-9);
    }

    #[test]
    fn mean_velocity_is_path_length_over_duration() {
        let scenario = Scenario {
            seed: 2,
            timeout: 8.0,
            ..Scenario::default()
        };
        let rec = run_episode(&scenario, &PlannerSetup::dra(quick_config())).unwrap().record;
        assert!(rec.mean_velocity >= 0.0);
        assert!((rec.mean_velocity * rec.task_duration - rec.path_length).abs() < 1e-9);
    }

    #[test]
    fn markov_pedestrians_stay_in_the_corridor() {
        let scenario = Scenario {
            n_pedestrians: 8,
            pedestrian_model: PedestrianModel::Markov,
            noise: NoiseParams {
                p_switch: 0.3,
                ..NoiseParams::default()
            },
            seed: 4,
            timeout: 6.0,
            ..Scenario::default()
        };
        let out = run_episode(&scenario, &PlannerSetup::dra(quick_config())).unwrap();
        let band = scenario.pedestrian_band();
        let mut diagonal = 0;
        for t in &out.trace.ticks {
            for o in &t.pedestrians {
                assert!(o.position.y >= band.lo - 1e-9 && o.position.y <= band.hi + 1e-9);
                if o.mode != WalkerMode::Horizontal {
                    diagonal += 1;
                }
            }
        }
        assert!(diagonal > 0);
    }

    #[test]
    fn invalid_scenario_reports_the_field() {
        let scenario = Scenario {
            corridor_width: 0.5,
            ..Scenario::default()
        };
        let err = run_episode(&scenario, &PlannerSetup::dra(quick_config())).unwrap_err();
        assert_eq!(err.field, "scenario.corridor_width");
    }
}
