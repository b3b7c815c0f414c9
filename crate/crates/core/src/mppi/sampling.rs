use statrs::distribution::{ContinuousCDF, Normal};

use super::halton::{halton_point, seeded_offset};
use super::spline::CubicSpline;
use super::MppiParams;

/// Additive input perturbation for one rollout: `[dv, domega]` per step.
pub type Perturbation = Vec<[f64; 2]>;

/// `samples - 1` smooth perturbation sequences. For each sample, the knots of
/// both channels come from one Halton point mapped through the inverse
/// standard-normal CDF; a natural cubic spline through the knots (spread
/// evenly over the horizon) is evaluated at every step.
pub fn sample_halton_splines(params: &MppiParams, seed: u64) -> Vec<Perturbation> {
    let horizon = params.horizon;
    let n_knots = params.n_knots;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let span = (horizon - 1) as f64;
    let knot_times: Vec<f64> = (0..n_knots)
        .map(|i| span * i as f64 / (n_knots - 1) as f64)
        .collect();
    let degenerate = horizon == 1;
    let offset = seeded_offset(seed);

    (0..params.samples as u64 - 1)
        .map(|k| {
            let u = halton_point(offset + k, 2 * n_knots);
            let z: Vec<f64> = u.iter().map(|&p| std_normal.inverse_cdf(p)).collect();
            let channel = |values: &[f64], sigma: f64| -> Vec<f64> {
                if sigma == 0.0 {
                    return vec![0.0; horizon];
                }
                if degenerate {
                    return vec![sigma * values[0]];
                }
                let spline = CubicSpline::natural(&knot_times, values);
                (0..horizon).map(|t| sigma * spline.eval(t as f64)).collect()
            };
            let dv = channel(&z[..n_knots], params.sigma_v);
            let dw = channel(&z[n_knots..], params.sigma_omega);
            dv.into_iter().zip(dw).map(|(a, b)| [a, b]).collect()
        })
        .collect()
}
