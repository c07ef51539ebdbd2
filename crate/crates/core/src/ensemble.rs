//! Trajectory ensembles and outcome statistics.
//!
//! Trajectory `trial` at grid point `point` draws its field from the
//! ChaCha stream [`stream_id`]`(point, trial)` under the noise config's
//! seed, so the counts depend only on the seed and never on how work is
//! spread across threads. Counts are integers and reduce exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{born_weight, BlochState, ModelParams};
use crate::error::{Error, Result};
use crate::integrator::{integrate_with, IntegratorConfig, Outcome};
use crate::noise::{NoiseConfig, NoiseSource};
use crate::scalar::Real;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Stream of trial `trial` at grid point `point`.
pub fn stream_id(point: usize, trial: u64) -> u64 {
    ((point as u64) << 32) | (trial & 0xffff_ffff)
}

/// `count` interior angles `k pi / (count + 1)`, `k = 1..=count`.
/// Eleven points gives `pi/12, ..., 11 pi/12`.
pub fn theta_grid(count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| std::f64::consts::PI * k as f64 / (count + 1) as f64)
        .collect()
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Outcome counts at one initial angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub theta0: f64,
    pub trials: u64,
    /// Includes unresolved runs ending in the upper hemisphere.
    pub up_down: u64,
    pub unresolved: u64,
}

impl PointStats {
    pub fn frequency(&self) -> f64 {
        self.up_down as f64 / self.trials as f64
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.up_down, self.trials, Z95)
    }

    /// `cos^2(theta0 / 2)`.
    pub fn born_target(&self) -> f64 {
        born_weight(self.theta0)
    }

    pub fn deviation(&self) -> f64 {
        self.frequency() - self.born_target()
    }

    pub fn unresolved_fraction(&self) -> f64 {
        self.unresolved as f64 / self.trials as f64
    }

    /// Binomial standard error at the Born target.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub points: Vec<PointStats>,
}

impl EnsembleStats {
    pub fn unresolved_fraction(&self) -> f64 {
        let (u, n) = self
            .points
            .iter()
            .fold((0, 0), |(u, n), p| (u + p.unresolved, n + p.trials));
        u as f64 / n as f64
    }

    /// Columns `theta0, weight, trials, p_hat, ci_lo, ci_hi, born_target,
    /// unresolved_frac`, where `weight = sin^2(theta0/2)`.
    pub fn to_csv_rows(&self) -> Vec<[String; 8]> {
        self.points
            .iter()
            .map(|p| {
                let (lo, hi) = p.wilson();
                let w = (p.theta0 / 2.0).sin();
                [
                    p.theta0.to_string(),
                    (w * w).to_string(),
                    p.trials.to_string(),
                    p.frequency().to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    p.born_target().to_string(),
                    p.unresolved_fraction().to_string(),
                ]
            })
            .collect()
    }
}

pub const BORN_CURVE_HEADER: [&str; 8] = [
    "theta0",
    "weight",
    "trials",
    "p_hat",
    "ci_lo",
    "ci_hi",
    "born_target",
    "unresolved_frac",
];

/// Runs `trials` trajectories from every angle in `grid`.
///
/// `noise.stream_id` is ignored: each trajectory gets its own stream.
pub fn run_ensemble<T: Real>(
    grid: &[T],
    trials: u64,
    params: &ModelParams<T>,
    noise: &NoiseConfig<T>,
    integ: &IntegratorConfig<T>,
) -> Result<EnsembleStats> {
    params.validate()?;
    noise.validate()?;
    integ.validate()?;
    if trials == 0 || trials > u32::MAX as u64 {
        return Err(Error::InvalidParams(vec![format!(
            "trials must lie in [1, 2^32) (got {trials})"
        )]));
    }
    if let Some(bad) = grid.iter().find(|&&t| !(t >= T::zero() && t <= T::PI())) {
        return Err(Error::InvalidParams(vec![format!(
            "initial angles must lie in [0, pi] (got {bad})"
        )]));
    }

    let total = grid.len() as u64 * trials;
    let outcomes: Vec<u8> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let point = (idx / trials) as usize;
            let trial = idx % trials;
            let cfg = noise.with_stream(stream_id(point, trial));
            let wrap = |e: Error| Error::Trajectory {
                point,
                trial,
                source: Box::new(e),
            };
            let source = NoiseSource::new(&cfg).map_err(wrap)?;
            let rec = integrate_with(BlochState::new(grid[point], T::zero()), params, source, integ)
                .map_err(wrap)?;
            let up = (rec.hemisphere_outcome() == Outcome::UpDown) as u8;
            let unresolved = (rec.is_unresolved() as u8) << 1;
            Ok(up | unresolved)
        })
        .collect::<Result<_>>()?;

    let points = grid
        .iter()
        .enumerate()
        .map(|(point, &theta0)| {
            let chunk = &outcomes[point * trials as usize..(point + 1) * trials as usize];
            PointStats {
                theta0: theta0.to_f64_lossy(),
                trials,
                up_down: chunk.iter().filter(|&&o| o & 1 == 1).count() as u64,
                unresolved: chunk.iter().filter(|&&o| o & 2 == 2).count() as u64,
            }
        })
        .collect();
    Ok(EnsembleStats { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMetric {
    /// `max |p - born|`.
    MaxAbs,
    /// Euclidean norm of `p - born` over the grid.
    L2,
    /// Mean of `p - born`.
    SignedMean,
    /// Mean of `sign(cos theta0) (p - born)`: positive when the statistics
    /// are sharper than Born's rule (too step-like), negative when flatter.
    /// Monotone decreasing in `B0`.
    OrientedMean,
}

/// Aggregate of `p_hat - cos^2(theta0/2)` over the grid.
pub fn born_deviation(stats: &EnsembleStats, metric: DeviationMetric) -> f64 {
    let devs = stats.points.iter().map(|p| (p.theta0, p.deviation()));
    let n = stats.points.len() as f64;
    match metric {
        DeviationMetric::MaxAbs => devs.map(|(_, d)| d.abs()).fold(0.0, f64::max),
        DeviationMetric::L2 => devs.map(|(_, d)| d * d).sum::<f64>().sqrt(),
        DeviationMetric::SignedMean => devs.map(|(_, d)| d).sum::<f64>() / n,
        DeviationMetric::OrientedMean => {
            devs.map(|(t, d)| {
                let c = t.cos();
                // the equator carries no orientation
                if c.abs() < 1e-12 {
                    0.0
                } else {
                    c.signum() * d
                }
            })
            .sum::<f64>()
                / n
        }
    }
}
