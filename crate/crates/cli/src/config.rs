//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `scenario`, `robot`,
//! `mppi`, `risk`, `obstacles` and `experiment`. Every field has a default,
//! so an empty file is valid. Overrides use dotted paths, e.g.
//! `mppi.omega_soft=0` or `obstacles.noise.sigma_w=0.2`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use riskmppi::dynamics::RobotParams;
use riskmppi::mppi::{CostWeights, MppiParams, PlannerConfig};
use riskmppi::obstacles::{NoiseParams, SocialForceParams};
use riskmppi::risk::RiskParams;
use riskmppi::sim::{PedestrianModel, PlannerSetup, PredictionModes, Scenario};
use riskmppi::ConfigError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    /// Risk-aware MPPI as configured.
    Dra,
    /// Risk weights zeroed, obstacles reduced to mean predictions.
    Vanilla,
}

impl Planner {
    pub fn name(self) -> &'static str {
        match self {
            Planner::Dra => "dra",
            Planner::Vanilla => "vanilla",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub corridor_width: f64,
    pub corridor_length: f64,
    pub n_pedestrians: usize,
    pub pedestrian_model: PedestrianModel,
    pub v_ref: f64,
    pub timeout: f64,
    pub sim_dt: f64,
    pub pedestrian_radius: f64,
    pub spawn_x_min: f64,
    pub respawn_margin: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::default();
        Self {
            corridor_width: s.corridor_width,
            corridor_length: s.corridor_length,
            n_pedestrians: s.n_pedestrians,
            pedestrian_model: s.pedestrian_model,
            v_ref: s.v_ref,
            timeout: s.timeout,
            sim_dt: s.sim_dt,
            pedestrian_radius: s.pedestrian_radius,
            spawn_x_min: s.spawn_x_min,
            respawn_margin: s.respawn_margin,
        }
    }
}

/// Sampling parameters and cost weights share one section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiSection {
    pub samples: usize,
    pub horizon: usize,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    pub n_knots: usize,
    pub beta_init: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub gamma: f64,
    pub eta_lower: f64,
    pub eta_upper: f64,
    pub w_tracking: f64,
    pub w_speed: f64,
    pub w_rotation: f64,
    pub omega_soft: f64,
    pub omega_hard: f64,
    pub sigma_threshold: f64,
    pub w_collision: f64,
    pub w_wall: f64,
}

impl Default for MppiSection {
    fn default() -> Self {
        Self::from_parts(&MppiParams::default(), &CostWeights::default())
    }
}

impl MppiSection {
    fn from_parts(p: &MppiParams, w: &CostWeights) -> Self {
        Self {
            samples: p.samples,
            horizon: p.horizon,
            sigma_v: p.sigma_v,
            sigma_omega: p.sigma_omega,
            n_knots: p.n_knots,
            beta_init: p.beta_init,
            beta_min: p.beta_min,
            beta_max: p.beta_max,
            gamma: p.gamma,
            eta_lower: p.eta_lower,
            eta_upper: p.eta_upper,
            w_tracking: w.w_tracking,
            w_speed: w.w_speed,
            w_rotation: w.w_rotation,
            omega_soft: w.omega_soft,
            omega_hard: w.omega_hard,
            sigma_threshold: w.sigma_threshold,
            w_collision: w.w_collision,
            w_wall: w.w_wall,
        }
    }

    pub fn params(&self) -> MppiParams {
        MppiParams {
            samples: self.samples,
            horizon: self.horizon,
            sigma_v: self.sigma_v,
            sigma_omega: self.sigma_omega,
            n_knots: self.n_knots,
            beta_init: self.beta_init,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            gamma: self.gamma,
            eta_lower: self.eta_lower,
            eta_upper: self.eta_upper,
        }
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            w_tracking: self.w_tracking,
            w_speed: self.w_speed,
            w_rotation: self.w_rotation,
            omega_soft: self.omega_soft,
            omega_hard: self.omega_hard,
            sigma_threshold: self.sigma_threshold,
            w_collision: self.w_collision,
            w_wall: self.w_wall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstaclesSection {
    /// What the planner sees of each forecast: `full` or `mean`.
    pub modes: PredictionModes,
    pub noise: NoiseParams,
    pub social: SocialForceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub planners: Vec<Planner>,
    /// Write one JSON-lines trace per episode.
    pub traces: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: 20,
            seed: 0,
            out: PathBuf::from("results"),
            planners: vec![Planner::Dra],
            traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSection,
    pub robot: RobotParams,
    pub mppi: MppiSection,
    pub risk: RiskParams,
    pub obstacles: ObstaclesSection,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    /// Parses a TOML document after applying `key=value` overrides.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> anyhow::Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let de = toml::Value::Table(table);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("{path}: {}", e.into_inner())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text, overrides).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            robot: self.robot,
            mppi: self.mppi.params(),
            weights: self.mppi.weights(),
            risk: self.risk,
        }
    }

    pub fn scenario(&self) -> Scenario {
        let s = &self.scenario;
        Scenario {
            corridor_width: s.corridor_width,
            corridor_length: s.corridor_length,
            n_pedestrians: s.n_pedestrians,
            pedestrian_model: s.pedestrian_model,
            seed: self.experiment.seed,
            v_ref: s.v_ref,
            timeout: s.timeout,
            sim_dt: s.sim_dt,
            pedestrian_radius: s.pedestrian_radius,
            spawn_x_min: s.spawn_x_min,
            respawn_margin: s.respawn_margin,
            noise: self.obstacles.noise,
            social: self.obstacles.social,
        }
    }

    pub fn setup(&self, planner: Planner) -> PlannerSetup {
        match planner {
            Planner::Dra => PlannerSetup {
                modes: self.obstacles.modes,
                ..PlannerSetup::dra(self.planner_config())
            },
            Planner::Vanilla => PlannerSetup::vanilla(self.planner_config()),
        }
    }

    /// Checks every block before anything runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.planner_config().validate()?;
        self.obstacles.noise.validate().map_err(|e| e.within("obstacles.noise"))?;
        self.obstacles.social.validate().map_err(|e| e.within("obstacles.social"))?;
        let scenario = self.scenario();
        scenario.validate(self.robot.radius).map_err(|e| e.within("scenario"))?;
        scenario
            .control_period(self.robot.dt)
            .map_err(|e| e.within("scenario"))?;
        if self.experiment.trials < 1 {
            return Err(ConfigError::invalid("experiment.trials", "must be at least 1"));
        }
        if self.experiment.planners.is_empty() {
            return Err(ConfigError::invalid("experiment.planners", "must name at least one planner"));
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML literal
/// and falls back to a plain string, so `obstacles.modes=mean` works
/// without quotes.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> anyhow::Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not of the form key=value");
    };
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` has an empty segment");
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut node = table;
    for (i, p) in parents.iter().enumerate() {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override `{key}`: `{}` is not a section", parts[..=i].join(".")),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.planner_config(), PlannerConfig::default());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c = ExperimentConfig::from_toml_str(
            "[mppi]\nsamples = 100\n",
            &[
                "mppi.omega_soft=0".into(),
                "mppi.omega_hard=0".into(),
                "obstacles.modes=mean".into(),
                "obstacles.noise.sigma_w = 0.2".into(),
                "scenario.pedestrian_model=markov".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.mppi.samples, 100);
        assert_eq!(c.mppi.omega_soft, 0.0);
        assert!(!c.planner_config().weights.risk_enabled());
        assert_eq!(c.obstacles.modes, PredictionModes::Mean);
        assert_eq!(c.obstacles.noise.sigma_w, 0.2);
        assert_eq!(c.scenario.pedestrian_model, PedestrianModel::Markov);
    }

    #[test]
    fn unknown_field_is_reported_with_its_path() {
        let err = ExperimentConfig::from_toml_str("", &["mppi.samplez=3".into()]).unwrap_err();
        assert!(err.to_string().contains("mppi"), "{err}");
        let err = ExperimentConfig::from_toml_str("[risk]\nn_mc = \"many\"\n", &[]).unwrap_err();
        assert!(err.to_string().starts_with("risk.n_mc"), "{err}");
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let err = ExperimentConfig::from_toml_str("", &["scenario.corridor_width=0.5".into()]).unwrap_err();
        let err = err.downcast::<ConfigError>().unwrap();
        assert_eq!(err.field, "scenario.corridor_width");
        let err = ExperimentConfig::from_toml_str("", &["obstacles.noise.p_switch=2".into()]).unwrap_err();
        assert_eq!(err.downcast::<ConfigError>().unwrap().field, "obstacles.noise.p_switch");
        let err = ExperimentConfig::from_toml_str("", &["mppi.omega_hard=1".into()]).unwrap_err();
        assert_eq!(err.downcast::<ConfigError>().unwrap().field, "mppi.omega_hard");
    }

    #[test]
    fn malformed_override_is_rejected() {
        assert!(ExperimentConfig::from_toml_str("", &["mppi.samples".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["mppi..samples=3".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["mppi.samples.x=3".into()]).is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let c = ExperimentConfig::from_toml_str(
            "",
            &["risk.r=0.8".into(), "experiment.planners=[\"dra\", \"vanilla\"]".into()],
        )
        .unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn vanilla_setup_disables_risk() {
        let c = ExperimentConfig::default();
        let v = c.setup(Planner::Vanilla);
        assert_eq!(v.modes, PredictionModes::Mean);
        assert!(!v.config.weights.risk_enabled());
        assert_eq!(c.setup(Planner::Dra).config, c.planner_config());
    }
}
