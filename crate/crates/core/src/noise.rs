//! The stochastic field direction `chi(t)`.
//!
//! The stationary law is `sin(chi)/2` on `[0, pi]`, i.e. `cos(chi)` uniform on
//! `[-1, 1]`. Three processes share that marginal:
//!
//! * `Frozen`: one draw per trajectory.
//! * `PerStep`: an independent draw every integration step.
//! * `PoissonResample`: redraw at the events of a Poisson clock with mean
//!   spacing `tau_r`. The autocorrelation of `cos(chi)` is then exactly
//!   `exp(-|dt| / tau_r)`.
//!
//! Every realisation is a pure function of `(seed, stream_id)`: the seed
//! keys a ChaCha8 generator and the stream id selects one of its 2^64
//! independent streams, so ensembles do not depend on scheduling.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Frozen,
    PerStep,
    PoissonResample,
}

impl std::str::FromStr for NoiseMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "frozen" => Ok(Self::Frozen),
            "per_step" | "per-step" => Ok(Self::PerStep),
            "poisson_resample" | "poisson-resample" | "poisson" => Ok(Self::PoissonResample),
            other => Err(format!(
                "unknown noise mode `{other}` (expected frozen, per_step or poisson_resample)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig<T> {
    pub mode: NoiseMode,
    /// Correlation time. Only read in `PoissonResample` mode.
    pub tau_r: T,
    pub seed: u64,
    pub stream_id: u64,
}

impl<T: Real> NoiseConfig<T> {
    pub fn frozen(seed: u64) -> Self {
        Self {
            mode: NoiseMode::Frozen,
            tau_r: T::infinity(),
            seed,
            stream_id: 0,
        }
    }

    pub fn per_step(seed: u64) -> Self {
        Self {
            mode: NoiseMode::PerStep,
            tau_r: T::zero(),
            seed,
            stream_id: 0,
        }
    }

    pub fn poisson(tau_r: T, seed: u64) -> Self {
        Self {
            mode: NoiseMode::PoissonResample,
            tau_r,
            seed,
            stream_id: 0,
        }
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == NoiseMode::PoissonResample && !(self.tau_r > T::zero() && self.tau_r.is_finite()) {
            return Err(Error::InvalidParams(vec![format!(
                "tau_r must be finite and > 0 for poisson_resample (got {})",
                self.tau_r
            )]));
        }
        Ok(())
    }

    /// Generator for this configuration's substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Maps `u = cos(chi)` in `[-1, 1]` to `chi`.
#[inline]
pub fn chi_from_uniform<T: Real>(u: T) -> T {
    u.max(-T::one()).min(T::one()).acos()
}

/// One draw from the stationary density `sin(chi)/2`.
pub fn sample_stationary_chi<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let u: f64 = rng.random_range(-1.0..=1.0);
    chi_from_uniform(T::lit(u))
}

/// Supplies the (piecewise-constant) field angle for each integration step.
pub trait ChiSchedule<T> {
    /// Field angle on `[step * dt, (step + 1) * dt)`. Steps are requested in
    /// increasing order starting at zero.
    fn chi_for_step(&mut self, step: u64, dt: T) -> T;
}

/// A field direction that never changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantChi<T>(pub T);

impl<T: Real> ChiSchedule<T> for ConstantChi<T> {
    fn chi_for_step(&mut self, _step: u64, _dt: T) -> T {
        self.0
    }
}

/// Live realisation of the field, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct NoiseSource<T> {
    mode: NoiseMode,
    tau_r: T,
    rng: ChaCha8Rng,
    current: T,
    // (dt, resampling probability) for the last dt seen
    cached: Option<(T, f64)>,
}

impl<T: Real> NoiseSource<T> {
    /// Draws the initial direction `chi(0)` from the stationary law.
    pub fn new(config: &NoiseConfig<T>) -> Result<Self> {
        config.validate()?;
        let mut rng = config.rng();
        let current = sample_stationary_chi(&mut rng);
        Ok(Self {
            mode: config.mode,
            tau_r: config.tau_r,
            rng,
            current,
            cached: None,
        })
    }

    pub fn current(&self) -> T {
        self.current
    }

    fn resample_probability(&mut self, dt: T) -> f64 {
        match self.cached {
            Some((d, p)) if d == dt => p,
            _ => {
                let p = -(-(dt / self.tau_r)).to_f64_lossy().exp_m1();
                self.cached = Some((dt, p));
                p
            }
        }
    }

    /// Moves the field forward by `dt` and returns the new direction.
    /// Reports whether a fresh draw happened alongside the value.
    pub fn advance_flagged(&mut self, dt: T) -> (T, bool) {
        let redraw = match self.mode {
            NoiseMode::Frozen => false,
            NoiseMode::PerStep => true,
            NoiseMode::PoissonResample => {
                let p = self.resample_probability(dt);
                self.rng.random::<f64>() < p
            }
        };
        if redraw {
            self.current = sample_stationary_chi(&mut self.rng);
        }
        (self.current, redraw)
    }

    pub fn advance(&mut self, dt: T) -> T {
        self.advance_flagged(dt).0
    }
}

impl<T: Real> ChiSchedule<T> for NoiseSource<T> {
    fn chi_for_step(&mut self, step: u64, dt: T) -> T {
        if step == 0 {
            self.current
        } else {
            self.advance(dt)
        }
    }
}

/// A materialised realisation: `values[i]` holds on `[times[i], times[i+1])`,
/// the last value up to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub horizon: T,
}

impl<T: Real> NoisePath<T> {
    pub fn value_at(&self, t: T) -> T {
        let idx = self.times.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    pub fn jump_count(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn check(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::NoisePath("times and values must be nonempty and equally long".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NoisePath("jump times must be strictly increasing".into()));
        }
        if self.values.iter().any(|&v| !(v >= T::zero() && v <= T::PI())) {
            return Err(Error::NoisePath("values must lie in [0, pi]".into()));
        }
        Ok(())
    }

    /// Columns `t_start, chi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_start", "chi"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, horizon: T) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<T> {
                let field = rec.get(i).ok_or_else(|| Error::Csv(format!("missing column {i}")))?;
                let x: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Csv(format!("bad number `{field}`: {e}")))?;
                Ok(T::lit(x))
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        let path = Self { times, values, horizon };
        path.check()?;
        Ok(path)
    }
}

impl<T: Real> ChiSchedule<T> for &NoisePath<T> {
    fn chi_for_step(&mut self, step: u64, dt: T) -> T {
        // Midpoint lookup keeps grid-snapped jump times unambiguous.
        let t = (T::from_u64(step).unwrap() + T::lit(0.5)) * dt;
        self.value_at(t)
    }
}

/// Materialises the field on a step grid of spacing `step`, with jump times
/// snapped to that grid. Consuming the path step by step reproduces exactly
/// what a [`NoiseSource`] with the same configuration would have produced.
pub fn make_noise_path<T: Real>(horizon: T, step: T, config: &NoiseConfig<T>) -> Result<NoisePath<T>> {
    if !(horizon > T::zero() && step > T::zero()) {
        return Err(Error::InvalidParams(vec![
            "horizon and step must be positive".to_string(),
        ]));
    }
    let mut source = NoiseSource::new(config)?;
    let mut times = vec![T::zero()];
    let mut values = vec![source.current()];
    let n_steps = (horizon / step).ceil().to_u64().unwrap_or(0);
    for k in 1..n_steps {
        let (chi, redraw) = source.advance_flagged(step);
        if redraw {
            times.push(T::from_u64(k).unwrap() * step);
            values.push(chi);
        }
    }
    Ok(NoisePath { times, values, horizon })
}
