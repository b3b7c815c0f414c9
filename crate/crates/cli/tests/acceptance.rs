//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any hard criterion fails. The planning-time target is
//! reported but never fails the run.

use std::time::Instant;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskmppi::dynamics::{step, ControlInput, RobotState};
use riskmppi::mppi::{importance_sampling, plan, Controller, PlannerConfig, ReferencePath};
use riskmppi::obstacles::{predict_constant_velocity, GaussianMode, NoiseParams, ObstaclePrediction, ObstacleState};
use riskmppi::risk::{build_region, build_risk_field, estimate_joint_cp, quadrature_cp, RiskParams};
use riskmppi::sim::{run_batch, AggregateRow, PedestrianModel, PlannerSetup, Scenario};
use riskmppi_cli::validate_estimator;

const TRIALS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(name: &str, hard: bool, o: &Outcome) -> bool {
    let tag = match (o.pass, hard) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FLAG",
    };
    println!("[{tag}] {name}: {}", o.detail);
    o.pass || !hard
}

fn estimator_accuracy() -> Outcome {
    let r = validate_estimator(1000, 2024, &RiskParams::default());
    Outcome {
        pass: r.mean_abs_error <= 0.02 && r.miss_rate_above_threshold < 0.02,
        detail: format!(
            "mean |err| {:.4} (<= 0.02), missed {}/{} at or above 0.05 -> {:.2}% (< 2%), max |err| {:.3}",
            r.mean_abs_error,
            r.misclassified,
            r.at_or_above_threshold,
            100.0 * r.miss_rate_above_threshold,
            r.max_abs_error
        ),
    }
}

fn closed_form() -> Outcome {
    let params = RiskParams::default();
    let r = params.r;
    let variance = 0.09;
    let exact = 1.0 - (-r * r / (2.0 * variance)).exp();
    let mode = GaussianMode::isotropic(Vector2::zeros(), variance, 1.0).unwrap();
    let preds = vec![ObstaclePrediction::new(0.3, vec![vec![mode]]).unwrap()];
    let q = quadrature_cp(&Vector2::zeros(), &preds, 0, r, r / 50.0);
    let region = build_region(&[Vector2::new(-2.0, -1.0), Vector2::new(3.0, 1.5)], r);
    let field = build_risk_field(region, &preds, 0, &params, &mut ChaCha8Rng::seed_from_u64(1));
    let e = estimate_joint_cp(&Vector2::zeros(), &field, &params);
    Outcome {
        pass: (e - exact).abs() <= 0.02 && (q - exact).abs() <= 1e-3,
        detail: format!("exact {exact:.5}, estimate {e:.5} (+-0.02), quadrature {q:.6} (+-1e-3)"),
    }
}

fn importance_weights() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sum = 0.0f64;
    let mut monotone = true;
    let mut worst_shift = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(2..200);
        let beta = rng.random_range(0.05..10.0);
        let costs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0 * beta)).collect();
        let w = importance_sampling(&costs, beta);
        worst_sum = worst_sum.max((w.weights.iter().sum::<f64>() - 1.0).abs());
        for i in 0..n {
            for j in 0..n {
                if costs[i] < costs[j] && w.weights[i] <= w.weights[j] {
                    monotone = false;
                }
            }
        }
        let shift = rng.random_range(-1e3..1e3);
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let ws = importance_sampling(&shifted, beta);
        for (a, b) in w.weights.iter().zip(&ws.weights) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    let beta = 0.7;
    let pair = importance_sampling(&[0.0, beta * std::f64::consts::LN_2], beta);
    let pair_err = (pair.weights[0] - 2.0 / 3.0).abs().max((pair.weights[1] - 1.0 / 3.0).abs());
    Outcome {
        pass: worst_sum <= 1e-9 && monotone && worst_shift <= 1e-9 && pair_err <= 1e-12,
        detail: format!(
            "max |sum - 1| {worst_sum:.1e}, strictly monotone {monotone}, max shift change {worst_shift:.1e}, \
             [0, beta ln2] -> [{:.15}, {:.15}]",
            pair.weights[0], pair.weights[1]
        ),
    }
}

fn batch(n_pedestrians: usize, model: PedestrianModel, setups: &[PlannerSetup]) -> Vec<AggregateRow> {
    let scenario = Scenario {
        n_pedestrians,
        pedestrian_model: model,
        seed: 0,
        ..Scenario::default()
    };
    run_batch(&scenario, TRIALS, setups)
        .expect("valid benchmark configuration")
        .into_iter()
        .map(|b| b.row)
        .collect()
}

fn row_text(r: &AggregateRow) -> String {
    format!(
        "{} SR {:.0}%, duration {:.2} s, velocity {:.2} m/s, max CP {:.3} ({:.3})",
        r.config,
        100.0 * r.success_rate,
        r.duration_mean,
        r.velocity_mean,
        r.max_cp_mean,
        r.max_cp_std
    )
}

fn corridor_benchmark() -> Outcome {
    let row = &batch(4, PedestrianModel::Gaussian, &[PlannerSetup::dra(PlannerConfig::default())])[0];
    Outcome {
        pass: row.success_rate >= 0.9
            && (18.0..=24.0).contains(&row.duration_mean)
            && row.velocity_mean >= 1.5,
        detail: format!("{} over {TRIALS} trials (need SR >= 90%, duration in [18, 24], velocity >= 1.5)", row_text(row)),
    }
}

fn ablation() -> Outcome {
    let c = PlannerConfig::default();
    let rows = batch(8, PedestrianModel::Gaussian, &[PlannerSetup::dra(c), PlannerSetup::vanilla(c)]);
    let (dra, vanilla) = (&rows[0], &rows[1]);
    let gap = dra.success_rate - vanilla.success_rate;
    Outcome {
        pass: gap > 0.0 && gap >= 0.15 - 1e-12,
        detail: format!(
            "{}; {}; gap {:.0} points (need >= 15)",
            row_text(dra),
            row_text(vanilla),
            100.0 * gap
        ),
    }
}

fn multimodal() -> Outcome {
    let row = &batch(8, PedestrianModel::Markov, &[PlannerSetup::dra(PlannerConfig::default())])[0];
    Outcome {
        pass: row.success_rate >= 0.9 && row.max_cp_mean <= 0.06,
        detail: format!("{} over {TRIALS} trials (need SR >= 90%, mean max CP <= 0.06)", row_text(row)),
    }
}

/// Robot cruising at full speed toward pedestrians standing in a closed
/// ring around it. Only stopping keeps the risk below the threshold.
fn rejection() -> Outcome {
    let config = PlannerConfig::default();
    let noise = NoiseParams::default();
    let reference = ReferencePath::new(Vector2::zeros(), Vector2::new(35.0, 0.0), 2.0, Some(2.6));
    let n = 14;
    let wall: Vec<ObstacleState> = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let p = Vector2::new(1.9 * a.cos(), 1.9 * a.sin());
            ObstacleState::new(p, Vector2::zeros(), 0.3, p)
        })
        .collect();
    let preds: Vec<_> = wall
        .iter()
        .map(|o| predict_constant_velocity(o, &noise, config.mppi.horizon, config.robot.dt))
        .collect();

    let mut controller = Controller::new(config, 3).unwrap();
    controller.set_warm_start(vec![ControlInput::raw(2.0, 0.0); config.mppi.horizon]);
    let mut robot = RobotState::new(0.0, 0.0, 0.0, 2.0, 0.0);
    let mut max_rejected = 0;
    let mut all_rejected_iterations = 0;
    let mut brake_dominant = 0;
    for _ in 0..5 {
        let (out, rollouts) = controller.step_with_rollouts(&robot, &preds, &reference).unwrap();
        max_rejected = max_rejected.max(out.diagnostics.rejected);
        let crosses = |risk: &[f64]| risk.iter().any(|&p| p >= config.weights.sigma_threshold);
        if !crosses(&rollouts[0].risk) && rollouts[1..].iter().all(|r| crosses(&r.risk)) {
            all_rejected_iterations += 1;
            if rollouts[1..].iter().all(|r| r.weight < rollouts[0].weight) && rollouts[0].weight > 0.5 {
                brake_dominant += 1;
            }
        }
        robot = step(&robot, &out.optimal_inputs[0], &config.robot);
    }
    Outcome {
        pass: max_rejected > 0 && all_rejected_iterations > 0 && brake_dominant == all_rejected_iterations,
        detail: format!(
            "max rejected {max_rejected}/{}, iterations with only the braking sample feasible {all_rejected_iterations}, \
             braking sample dominant in {brake_dominant}",
            config.mppi.samples
        ),
    }
}

fn performance() -> Outcome {
    let config = PlannerConfig::default();
    let noise = NoiseParams::default();
    let reference = ReferencePath::new(Vector2::zeros(), Vector2::new(35.0, 0.0), 2.0, Some(2.6));
    let preds: Vec<_> = [(4.0, 0.5, -1.3), (6.0, -1.0, -1.3), (3.0, -2.0, 1.3), (8.0, 1.5, 1.3)]
        .iter()
        .map(|&(x, y, vx)| {
            let o = ObstacleState::new(Vector2::new(x, y), Vector2::new(vx, 0.0), 0.3, Vector2::new(x + vx * 100.0, y));
            predict_constant_velocity(&o, &noise, config.mppi.horizon, config.robot.dt)
        })
        .collect();
    let robot = RobotState::new(0.0, 0.0, 0.0, 1.5, 0.0);
    let warm = vec![ControlInput::raw(2.0, 0.0); config.mppi.horizon];
    let mut times = Vec::new();
    for seed in 0..12 {
        let start = Instant::now();
        plan(&robot, &preds, &reference, &warm, 1.0, &config, seed).unwrap();
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    // first two calls warm up the thread pool and caches
    let times = &times[2..];
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    Outcome {
        pass: mean <= 200.0,
        detail: format!(
            "mean plan time {mean:.1} ms over {} calls on {} thread(s) (target <= 200 ms on 8 cores)",
            times.len(),
            rayon::current_num_threads()
        ),
    }
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture; they do not apply.
    let mut ok = true;
    ok &= report("estimator accuracy", true, &estimator_accuracy());
    ok &= report("closed-form check", true, &closed_form());
    ok &= report("importance sampling", true, &importance_weights());
    ok &= report("rejection behavior", true, &rejection());
    ok &= report("performance target (soft)", false, &performance());
    ok &= report("corridor benchmark, 4 pedestrians", true, &corridor_benchmark());
    ok &= report("risk-awareness ablation, 8 pedestrians", true, &ablation());
    ok &= report("multi-modal scenario, 8 Markov pedestrians", true, &multimodal());
    if !ok {
        std::process::exit(1);
    }
}
