//! Batch runner: executes every configured planner and writes the results.
//!
//! Layout of the output directory:
//!
//! ```text
//! config.toml                effective configuration after overrides
//! aggregate.csv              one row per planner
//! summary.txt                plain-text table
//! traces/<planner>_<seed>.jsonl
//! ```
//!
//! A trace starts with a header line (seed, radii, goal, initial states)
//! followed by one line per sim tick.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use riskmppi::dynamics::RobotState;
use riskmppi::obstacles::ObstacleState;
use riskmppi::sim::{aggregate, run_batch, AggregateRow, EpisodeTrace, TickRecord};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceHeader {
    seed: u64,
    robot_radius: f64,
    goal_x: f64,
    timeout: f64,
    initial_robot: RobotState,
    initial_pedestrians: Vec<ObstacleState>,
}

pub fn write_trace<W: Write>(trace: &EpisodeTrace, mut out: W) -> anyhow::Result<()> {
    let header = TraceHeader {
        seed: trace.seed,
        robot_radius: trace.robot_radius,
        goal_x: trace.goal_x,
        timeout: trace.timeout,
        initial_robot: trace.initial_robot,
        initial_pedestrians: trace.initial_pedestrians.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for tick in &trace.ticks {
        serde_json::to_writer(&mut out, tick)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> anyhow::Result<EpisodeTrace> {
    let mut lines = input.lines();
    let first = lines.next().context("empty trace")??;
    let header: TraceHeader = serde_json::from_str(&first).context("trace header")?;
    let mut ticks = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tick: TickRecord = serde_json::from_str(&line).with_context(|| format!("trace line {}", i + 2))?;
        ticks.push(tick);
    }
    Ok(EpisodeTrace {
        seed: header.seed,
        robot_radius: header.robot_radius,
        goal_x: header.goal_x,
        timeout: header.timeout,
        initial_robot: header.initial_robot,
        initial_pedestrians: header.initial_pedestrians,
        ticks,
    })
}

pub fn read_trace_file(path: &Path) -> anyhow::Result<EpisodeTrace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trace(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn trace_path(out: &Path, planner: &str, seed: u64) -> PathBuf {
    out.join("traces").join(format!("{planner}_{seed}.jsonl"))
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    config: &'a str,
    n_pedestrians: usize,
    pedestrian_model: String,
    trials: usize,
    success_rate: f64,
    successes: usize,
    collisions: usize,
    timeouts: usize,
    duration_mean: f64,
    duration_std: f64,
    velocity_mean: f64,
    velocity_std: f64,
    max_cp_mean: f64,
    max_cp_std: f64,
    runtime_ms_mean: f64,
    runtime_ms_std: f64,
}

impl<'a> From<&'a AggregateRow> for CsvRow<'a> {
    fn from(r: &'a AggregateRow) -> Self {
        Self {
            config: &r.config,
            n_pedestrians: r.n_pedestrians,
            pedestrian_model: r.pedestrian_model.to_string(),
            trials: r.trials,
            success_rate: r.success_rate,
            successes: r.successes,
            collisions: r.collisions,
            timeouts: r.timeouts,
            duration_mean: r.duration_mean,
            duration_std: r.duration_std,
            velocity_mean: r.velocity_mean,
            velocity_std: r.velocity_std,
            max_cp_mean: r.max_cp_mean,
            max_cp_std: r.max_cp_std,
            runtime_ms_mean: r.runtime_ms_mean,
            runtime_ms_std: r.runtime_ms_std,
        }
    }
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Table with the columns Task Duration, Velocity, CP, SR and Runtime.
pub fn summary_table(rows: &[AggregateRow]) -> String {
    let mut s = format!(
        "{:<10} {:>5} {:<9} {:>6} {:>18} {:>16} {:>16} {:>7} {:>16}\n",
        "planner", "peds", "model", "trials", "duration [s]", "velocity [m/s]", "max CP", "SR [%]", "runtime [ms]"
    );
    for r in rows {
        s += &format!(
            "{:<10} {:>5} {:<9} {:>6} {:>18} {:>16} {:>16} {:>7.1} {:>16}\n",
            r.config,
            r.n_pedestrians,
            r.pedestrian_model.to_string(),
            r.trials,
            format!("{:.2} ({:.2})", r.duration_mean, r.duration_std),
            format!("{:.2} ({:.2})", r.velocity_mean, r.velocity_std),
            format!("{:.3} ({:.3})", r.max_cp_mean, r.max_cp_std),
            100.0 * r.success_rate,
            format!("{:.1} ({:.1})", r.runtime_ms_mean, r.runtime_ms_std),
        );
    }
    s
}

fn write_tables(out: &Path, rows: &[AggregateRow]) -> anyhow::Result<()> {
    write_aggregate_csv(rows, BufWriter::new(File::create(out.join("aggregate.csv"))?))?;
    fs::write(out.join("summary.txt"), summary_table(rows))?;
    Ok(())
}

/// Runs every planner of `config` and writes the artifacts to `out`.
/// Tables are rewritten after each planner, so an error part-way leaves the
/// completed results on disk.
pub fn run(config: &ExperimentConfig, out: &Path) -> anyhow::Result<Vec<AggregateRow>> {
    config.validate()?;
    fs::create_dir_all(out.join("traces")).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), config.to_toml())?;

    let scenario = config.scenario();
    let mut rows = Vec::new();
    for &planner in &config.experiment.planners {
        let setup = config.setup(planner);
        let results = run_batch(&scenario, config.experiment.trials, std::slice::from_ref(&setup))
            .with_context(|| format!("planner {}", planner.name()))?;
        for result in results {
            if config.experiment.traces {
                for e in &result.episodes {
                    let path = trace_path(out, planner.name(), e.record.seed);
                    write_trace(&e.trace, BufWriter::new(File::create(&path)?))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
            rows.push(result.row);
        }
        write_tables(out, &rows)?;
    }
    Ok(rows)
}

/// Rebuilds the aggregate rows from the traces of a finished run.
pub fn aggregate_from_traces(config: &ExperimentConfig, out: &Path) -> anyhow::Result<Vec<AggregateRow>> {
    let scenario = config.scenario();
    config
        .experiment
        .planners
        .iter()
        .map(|&planner| {
            let episodes = (0..config.experiment.trials as u64)
                .map(|i| {
                    let trace = read_trace_file(&trace_path(out, planner.name(), scenario.seed.wrapping_add(i)))?;
                    Ok(riskmppi::sim::EpisodeOutcome {
                        record: riskmppi::sim::metrics_from_trace(&trace),
                        trace,
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(aggregate(planner.name(), &scenario, &episodes))
        })
        .collect()
}
