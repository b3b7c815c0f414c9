use serde::{Deserialize, Serialize};

use super::MppiParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    pub weights: Vec<f64>,
    /// Minimum cost.
    pub rho: f64,
    /// Sum of the unnormalized weights; between 1 and K.
    pub eta: f64,
}

/// Exponentiated-cost weights `exp(-(S_k - rho) / beta) / eta`.
pub fn importance_sampling(costs: &[f64], beta: f64) -> ImportanceWeights {
    assert!(beta > 0.0, "beta must be positive");
    assert!(!costs.is_empty(), "no costs to weigh");
    let rho = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs.iter().map(|s| (-(s - rho) / beta).exp()).collect();
    let eta: f64 = raw.iter().sum();
    ImportanceWeights {
        weights: raw.into_iter().map(|w| w / eta).collect(),
        rho,
        eta,
    }
}

/// Keeps the normalization sum inside `[eta_lower, eta_upper]`: a small sum
/// means the weight sits on too few samples, so beta grows by `1 / gamma`;
/// a large sum shrinks it by `gamma`. Clamped to `[beta_min, beta_max]`.
pub fn update_beta(beta: f64, eta: f64, params: &MppiParams) -> f64 {
    let next = if eta < params.eta_lower {
        beta / params.gamma
    } else if eta > params.eta_upper {
        beta * params.gamma
    } else {
        beta
    };
    next.clamp(params.beta_min, params.beta_max)
}
