//! Risk-aware MPPI motion planning among stochastic dynamic obstacles.
//!
//! * [`dynamics`]: second-order unicycle robot model.
//! * [`obstacles`]: pedestrian simulators and Mixture-of-Gaussians forecasts.
//! * [`risk`]: shared-sample Monte Carlo joint collision probability.
//! * [`mppi`]: the sampling-based controller.
//! * [`sim`]: closed-loop corridor experiments and their metrics.

pub mod dynamics;
pub mod error;
pub mod mppi;
pub mod obstacles;
pub mod risk;
pub mod sim;

pub use error::ConfigError;
