//! Monte Carlo estimation of the joint collision probability.
//!
//! For one planner step, every rollout position lies in a small area. A single
//! set of uniform samples is drawn from the bounding rectangle of all
//! positions (inflated by the collision radius) and the joint obstacle density
//! is evaluated once per sample. The collision probability of each rollout is
//! then the mean density of the samples inside its collision disk, times the
//! disk area.
//!
//! [`quadrature_cp`] integrates the same joint density deterministically and
//! serves as the reference for tests and a-posteriori metrics.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::Vector2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::obstacles::ObstaclePrediction;

/// Modes whose Gaussian exponent is below `-CULL_EXPONENT` everywhere in the
/// area of interest are skipped. `exp(-40)` times the largest possible peak
/// density stays below 1e-12.
const CULL_EXPONENT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRegion {
    pub x_lower: f64,
    pub x_upper: f64,
    pub y_lower: f64,
    pub y_upper: f64,
}

impl SamplingRegion {
    pub fn width(&self) -> f64 {
        self.x_upper - self.x_lower
    }

    pub fn height(&self) -> f64 {
        self.y_upper - self.y_lower
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.x_lower && p.x <= self.x_upper && p.y >= self.y_lower && p.y <= self.y_upper
    }

    pub fn contains_disk(&self, center: &Vector2<f64>, r: f64) -> bool {
        center.x - r >= self.x_lower
            && center.x + r <= self.x_upper
            && center.y - r >= self.y_lower
            && center.y + r <= self.y_upper
    }

    /// Squared Euclidean distance from `p` to the rectangle (0 inside).
    fn distance_sq(&self, p: &Vector2<f64>) -> f64 {
        let dx = (self.x_lower - p.x).max(0.0).max(p.x - self.x_upper);
        let dy = (self.y_lower - p.y).max(0.0).max(p.y - self.y_upper);
        dx * dx + dy * dy
    }
}

/// Bounding box of `positions`, widened by `r` on each side.
pub fn build_region(positions: &[Vector2<f64>], r: f64) -> SamplingRegion {
    assert!(!positions.is_empty(), "region needs at least one position");
    let mut region = SamplingRegion {
        x_lower: f64::INFINITY,
        x_upper: f64::NEG_INFINITY,
        y_lower: f64::INFINITY,
        y_upper: f64::NEG_INFINITY,
    };
    for p in positions {
        region.x_lower = region.x_lower.min(p.x);
        region.x_upper = region.x_upper.max(p.x);
        region.y_lower = region.y_lower.min(p.y);
        region.y_upper = region.y_upper.max(p.y);
    }
    region.x_lower -= r;
    region.x_upper += r;
    region.y_lower -= r;
    region.y_upper += r;
    region
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskParams {
    pub n_mc: usize,
    /// Combined collision radius (robot + obstacle).
    pub r: f64,
    pub sigma_threshold: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            n_mc: 20_000,
            r: 0.7,
            sigma_threshold: 0.05,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_mc < 1 {
            return Err(ConfigError::invalid("n_mc", "must be at least 1"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(ConfigError::invalid("r", "must be positive"));
        }
        if !(self.sigma_threshold > 0.0 && self.sigma_threshold < 1.0) {
            return Err(ConfigError::invalid("sigma_threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Joint density from per-obstacle mixture densities:
/// `1 - prod(1 - d_o)` with survival factors clamped at zero, and never less
/// than the largest single density. Below unit density the second term is
/// inactive; for a single obstacle the result is `d` itself.
pub fn combine_densities(densities: impl IntoIterator<Item = f64>) -> f64 {
    let mut survival = 1.0;
    let mut largest = 0.0f64;
    for d in densities {
        survival *= (1.0 - d).max(0.0);
        largest = largest.max(d);
    }
    largest.max(1.0 - survival)
}

/// `1 - prod(1 - P_o)` over independent marginal collision probabilities.
pub fn combine_marginals(marginals: &[f64]) -> f64 {
    1.0 - marginals.iter().map(|p| 1.0 - p).product::<f64>()
}

#[derive(Debug, Clone, Copy)]
struct PreparedMode {
    mean: Vector2<f64>,
    // -0.5 * inverse covariance entries
    qa: f64,
    qb: f64,
    qc: f64,
    coef: f64,
}

impl PreparedMode {
    #[inline]
    fn eval(&self, p: &Vector2<f64>) -> f64 {
        let dx = p.x - self.mean.x;
        let dy = p.y - self.mean.y;
        self.coef * (self.qa * dx * dx + self.qb * dx * dy + self.qc * dy * dy).exp()
    }
}

/// Joint obstacle density of one planner step, with the covariance
/// inverses precomputed.
#[derive(Debug, Clone, Default)]
pub struct JointDensity {
    obstacles: Vec<Vec<PreparedMode>>,
}

impl JointDensity {
    pub fn new(predictions: &[ObstaclePrediction], t: usize) -> Self {
        Self::prepare(predictions, t, |_, _| true)
    }

    /// Drops modes that are negligible everywhere inside `region`.
    pub fn restricted_to(predictions: &[ObstaclePrediction], t: usize, region: &SamplingRegion) -> Self {
        Self::prepare(predictions, t, |mean, lambda_max| {
            0.5 * region.distance_sq(mean) / lambda_max <= CULL_EXPONENT
        })
    }

    fn prepare(
        predictions: &[ObstaclePrediction],
        t: usize,
        keep: impl Fn(&Vector2<f64>, f64) -> bool,
    ) -> Self {
        let obstacles = predictions
            .iter()
            .map(|pred| {
                pred.modes(t)
                    .iter()
                    .filter(|m| m.weight > 0.0)
                    .filter_map(|m| {
                        let c = &m.covariance;
                        let (a, b, d) = (c[(0, 0)], c[(0, 1)], c[(1, 1)]);
                        let det = a * d - b * b;
                        let half_trace = 0.5 * (a + d);
                        let lambda_max = half_trace + (half_trace * half_trace - det).max(0.0).sqrt();
                        keep(&m.mean, lambda_max).then(|| PreparedMode {
                            mean: m.mean,
                            qa: -0.5 * d / det,
                            qb: b / det,
                            qc: -0.5 * a / det,
                            coef: m.weight / (2.0 * PI * det.sqrt()),
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|modes| !modes.is_empty())
            .collect();
        Self { obstacles }
    }

    #[inline]
    pub fn eval(&self, p: &Vector2<f64>) -> f64 {
        combine_densities(
            self.obstacles
                .iter()
                .map(|modes| modes.iter().map(|m| m.eval(p)).sum::<f64>()),
        )
    }
}

/// Joint density of all obstacles at `point` for step `t`.
pub fn evaluate_joint_density(point: &Vector2<f64>, predictions: &[ObstaclePrediction], t: usize) -> f64 {
    combine_densities(predictions.iter().map(|p| p.density(t, point)))
}

/// Uniform grid over the region. Samples are stored sorted by cell, so the
/// samples of a run of cells in one row are contiguous.
#[derive(Debug, Clone)]
struct CellIndex {
    cell: f64,
    nx: usize,
    ny: usize,
    /// `starts[c]..starts[c + 1]` are the samples of cell `c`.
    starts: Vec<usize>,
    cell_sums: Vec<f64>,
}

/// Shared Monte Carlo samples with their joint density for one planner step.
#[derive(Debug, Clone)]
pub struct RiskField {
    region: SamplingRegion,
    coords: Vec<Vector2<f64>>,
    joint_density: Vec<f64>,
    index: CellIndex,
    density: JointDensity,
}

impl RiskField {
    /// Builds a field from given coordinates (all inside `region`).
    pub fn from_samples(
        region: SamplingRegion,
        coords: Vec<Vector2<f64>>,
        predictions: &[ObstaclePrediction],
        t: usize,
        r: f64,
    ) -> Self {
        let culled = JointDensity::restricted_to(predictions, t, &region);
        let joint_density: Vec<f64> = coords.par_iter().map(|p| culled.eval(p)).collect();
        Self::assemble(region, coords, joint_density, JointDensity::new(predictions, t), r)
    }

    fn assemble(
        region: SamplingRegion,
        coords: Vec<Vector2<f64>>,
        joint_density: Vec<f64>,
        density: JointDensity,
        r: f64,
    ) -> Self {
        let cell = r / 4.0;
        let nx = ((region.width() / cell).ceil() as usize).max(1);
        let ny = ((region.height() / cell).ceil() as usize).max(1);
        let cell_of = |p: &Vector2<f64>| {
            let ix = (((p.x - region.x_lower) / cell) as usize).min(nx - 1);
            let iy = (((p.y - region.y_lower) / cell) as usize).min(ny - 1);
            iy * nx + ix
        };
        let mut starts = vec![0usize; nx * ny + 1];
        let cells: Vec<usize> = coords.iter().map(cell_of).collect();
        for &c in &cells {
            starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut sorted_coords = vec![Vector2::zeros(); coords.len()];
        let mut sorted_density = vec![0.0; coords.len()];
        let mut cell_sums = vec![0.0; nx * ny];
        for (j, &c) in cells.iter().enumerate() {
            let slot = fill[c];
            fill[c] += 1;
            sorted_coords[slot] = coords[j];
            sorted_density[slot] = joint_density[j];
            cell_sums[c] += joint_density[j];
        }
        Self {
            region,
            coords: sorted_coords,
            joint_density: sorted_density,
            index: CellIndex {
                cell,
                nx,
                ny,
                starts,
                cell_sums,
            },
            density,
        }
    }

    pub fn region(&self) -> &SamplingRegion {
        &self.region
    }

    pub fn coords(&self) -> &[Vector2<f64>] {
        &self.coords
    }

    pub fn joint_density(&self) -> &[f64] {
        &self.joint_density
    }

    /// Joint density at an arbitrary point, evaluated exactly.
    pub fn density_at(&self, p: &Vector2<f64>) -> f64 {
        self.density.eval(p)
    }

    /// Number of samples and their density sum inside the disk.
    fn disk_sums(&self, c: &Vector2<f64>, r: f64) -> (usize, f64) {
        let idx = &self.index;
        let r2 = r * r;
        let to_cell = |v: f64, lo: f64, n: usize| -> isize {
            (((v - lo) / idx.cell).floor() as isize).clamp(0, n as isize - 1)
        };
        if c.x + r < self.region.x_lower
            || c.x - r > self.region.x_upper
            || c.y + r < self.region.y_lower
            || c.y - r > self.region.y_upper
        {
            return (0, 0.0);
        }
        let ix0 = to_cell(c.x - r, self.region.x_lower, idx.nx) as usize;
        let ix1 = to_cell(c.x + r, self.region.x_lower, idx.nx) as usize;
        let iy0 = to_cell(c.y - r, self.region.y_lower, idx.ny) as usize;
        let iy1 = to_cell(c.y + r, self.region.y_lower, idx.ny) as usize;

        let mut count = 0usize;
        let mut sum = 0.0;
        for iy in iy0..=iy1 {
            let y_lo = self.region.y_lower + iy as f64 * idx.cell;
            let y_hi = y_lo + idx.cell;
            let dy_far = (c.y - y_lo).abs().max((c.y - y_hi).abs());
            let dy_near = if c.y < y_lo { y_lo - c.y } else if c.y > y_hi { c.y - y_hi } else { 0.0 };
            for ix in ix0..=ix1 {
                let x_lo = self.region.x_lower + ix as f64 * idx.cell;
                let x_hi = x_lo + idx.cell;
                let dx_near = if c.x < x_lo { x_lo - c.x } else if c.x > x_hi { c.x - x_hi } else { 0.0 };
                if dx_near * dx_near + dy_near * dy_near > r2 {
                    continue;
                }
                let cell = iy * idx.nx + ix;
                let (s, e) = (idx.starts[cell], idx.starts[cell + 1]);
                let dx_far = (c.x - x_lo).abs().max((c.x - x_hi).abs());
                // farthest corner inside: the whole cell is
                if dx_far * dx_far + dy_far * dy_far <= r2 {
                    count += e - s;
                    sum += idx.cell_sums[cell];
                    continue;
                }
                for j in s..e {
                    let d = self.coords[j] - c;
                    if d.x * d.x + d.y * d.y <= r2 {
                        count += 1;
                        sum += self.joint_density[j];
                    }
                }
            }
        }
        (count, sum)
    }

    /// Writes `x,y,joint_density` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,joint_density")?;
        for (p, d) in self.coords.iter().zip(&self.joint_density) {
            writeln!(out, "{},{},{}", p.x, p.y, d)?;
        }
        Ok(())
    }
}

/// Draws `params.n_mc` uniform samples in `region` and evaluates the joint
/// density once per sample.
pub fn build_risk_field<R: Rng + ?Sized>(
    region: SamplingRegion,
    predictions: &[ObstaclePrediction],
    t: usize,
    params: &RiskParams,
    rng: &mut R,
) -> RiskField {
    let coords: Vec<Vector2<f64>> = (0..params.n_mc)
        .map(|_| {
            Vector2::new(
                region.x_lower + rng.random::<f64>() * region.width(),
                region.y_lower + rng.random::<f64>() * region.height(),
            )
        })
        .collect();
    RiskField::from_samples(region, coords, predictions, t, params.r)
}

/// Collision probability at `position` from the shared samples: mean joint
/// density of the samples inside the disk of radius `params.r`, times the
/// disk area. Falls back to the point density times the area when no sample
/// lands in the disk.
pub fn estimate_joint_cp(position: &Vector2<f64>, field: &RiskField, params: &RiskParams) -> f64 {
    let area = PI * params.r * params.r;
    let (count, sum) = field.disk_sums(position, params.r);
    let estimate = if count > 0 {
        area * sum / count as f64
    } else {
        area * field.density_at(position)
    };
    estimate.clamp(0.0, 1.0)
}

/// Reference collision probability: midpoint rule in polar coordinates over
/// the disk, with radial and arc-length spacing of about `resolution`.
pub fn quadrature_cp(
    position: &Vector2<f64>,
    predictions: &[ObstaclePrediction],
    t: usize,
    r: f64,
    resolution: f64,
) -> f64 {
    assert!(resolution > 0.0 && resolution <= r / 20.0, "quadrature resolution must be at most r/20");
    let bbox = build_region(&[*position], r);
    let density = JointDensity::restricted_to(predictions, t, &bbox);
    if density.obstacles.is_empty() {
        return 0.0;
    }
    let n_radial = (r / resolution).ceil() as usize;
    let n_angular = ((2.0 * PI * r / resolution).ceil() as usize).max(8);
    let dr = r / n_radial as f64;
    let dtheta = 2.0 * PI / n_angular as f64;
    let directions: Vec<(f64, f64)> = (0..n_angular)
        .map(|k| ((k as f64 + 0.5) * dtheta).sin_cos())
        .collect();
    let mut total = 0.0;
    for i in 0..n_radial {
        let rho = (i as f64 + 0.5) * dr;
        let ring: f64 = directions
            .iter()
            .map(|&(s, c)| density.eval(&Vector2::new(position.x + rho * c, position.y + rho * s)))
            .sum();
        total += ring * rho;
    }
    (total * dr * dtheta).clamp(0.0, 1.0)
}
