//! Fixed-step RK4 integration of the Bloch-angle ODEs and single
//! collapse trajectories.
//!
//! The field direction is piecewise constant: it is held fixed for one
//! integrator step of length `dt` and only changes between steps. Each step
//! may be split into several RK4 sub-steps for stiff (large `b`) runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{rates, BlochState, ModelParams};
use crate::error::{Error, Result};
use crate::noise::{ChiSchedule, NoiseConfig, NoiseSource};
use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig<T> {
    /// Step length; the field is constant across one step.
    pub dt: T,
    pub max_steps: u64,
    /// A trajectory has collapsed once it is within this angle of a pole.
    pub pole_threshold: T,
    /// Record every `record_stride`-th step; 0 records nothing.
    pub record_stride: u64,
    /// RK4 sub-steps per step.
    pub substeps: u32,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            max_steps: 8000,
            pole_threshold: T::lit(1e-3),
            record_stride: 0,
            substeps: 1,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            errs.push(format!("dt must be finite and > 0 (got {})", self.dt));
        }
        if self.max_steps < 1 {
            errs.push("max_steps must be >= 1".to_string());
        }
        if !(self.pole_threshold > T::zero() && self.pole_threshold < T::FRAC_PI_2()) {
            errs.push(format!(
                "pole_threshold must lie in (0, pi/2) (got {})",
                self.pole_threshold
            ));
        }
        if self.substeps < 1 {
            errs.push("substeps must be >= 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    /// Smallest sub-step count keeping `sub_dt * rate * (1 + b) <= max_product`,
    /// where `rate * (1 + b)` bounds the linearised theta flow.
    pub fn stable_substeps(&self, params: &ModelParams<T>, max_product: T) -> u32 {
        let stiffness = params.collapse_rate() * (T::one() + params.field_ratio());
        let n = (self.dt * stiffness / max_product).ceil();
        n.to_u32().unwrap_or(u32::MAX).max(1)
    }

    pub fn with_stable_substeps(mut self, params: &ModelParams<T>, max_product: T) -> Self {
        self.substeps = self.stable_substeps(params, max_product);
        self
    }
}

#[inline]
fn axpy<T: Real>(s: &BlochState<T>, h: T, k: &BlochState<T>) -> BlochState<T> {
    BlochState {
        theta: s.theta + h * k.theta,
        phi: s.phi + h * k.phi,
        xi: s.xi + h * k.xi,
        log_norm: s.log_norm + h * k.log_norm,
    }
}

/// One classical RK4 step with the field direction held at `chi`.
/// `theta` is clamped to `[0, pi]` and `phi` wrapped to `[-pi, pi)`.
/// Non-finite results are passed through untouched so callers can detect them.
pub fn step_rk4<T: Real>(state: &BlochState<T>, chi: T, params: &ModelParams<T>, dt: T) -> BlochState<T> {
    let half = dt / T::lit(2.0);
    let k1 = rates(state, params, chi);
    let k2 = rates(&axpy(state, half, &k1), params, chi);
    let k3 = rates(&axpy(state, half, &k2), params, chi);
    let k4 = rates(&axpy(state, dt, &k3), params, chi);
    let two = T::lit(2.0);
    let sixth = dt / T::lit(6.0);
    let comb = |a: T, b: T, c: T, d: T| sixth * (a + two * b + two * c + d);
    let mut next = BlochState {
        theta: state.theta + comb(k1.theta, k2.theta, k3.theta, k4.theta),
        phi: state.phi + comb(k1.phi, k2.phi, k3.phi, k4.phi),
        xi: state.xi + comb(k1.xi, k2.xi, k3.xi, k4.xi),
        log_norm: state.log_norm + comb(k1.log_norm, k2.log_norm, k3.log_norm, k4.log_norm),
    };
    if next.theta.is_finite() {
        next.theta = next.theta.max(T::zero()).min(T::PI());
    }
    if next.phi.is_finite() {
        next.phi = wrap_angle(next.phi);
    }
    next
}

/// Evolves for exactly `n_steps` steps of length `dt` (no pole detection).
/// Returns the `n_steps + 1` states including the initial one.
pub fn evolve<T: Real, S: ChiSchedule<T>>(
    initial: BlochState<T>,
    params: &ModelParams<T>,
    mut schedule: S,
    dt: T,
    n_steps: u64,
) -> Result<Vec<BlochState<T>>> {
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    let mut state = initial;
    out.push(state);
    for step in 0..n_steps {
        let chi = schedule.chi_for_step(step, dt);
        state = step_rk4(&state, chi, params, dt);
        if !state.is_finite() {
            return Err(Error::NonFinite { step });
        }
        out.push(state);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    /// Collapsed onto `|up,down>` (`theta -> 0`).
    UpDown,
    /// Collapsed onto `|down,up>` (`theta -> pi`).
    DownUp,
    /// Step budget exhausted before reaching either pole region.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSample<T> {
    pub t: T,
    pub theta: T,
    pub phi: T,
    pub xi: T,
    pub log_norm: T,
    pub chi: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub theta0: T,
    pub phi0: T,
    pub outcome: Outcome,
    pub steps_used: u64,
    pub final_state: BlochState<T>,
    pub path: Option<Vec<PathSample<T>>>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn is_unresolved(&self) -> bool {
        self.outcome == Outcome::Unresolved
    }

    /// Resolved outcome, or the hemisphere of the final angle for
    /// unresolved runs (`theta < pi/2` counts as `UpDown`).
    pub fn hemisphere_outcome(&self) -> Outcome {
        match self.outcome {
            Outcome::Unresolved if self.final_state.theta < T::FRAC_PI_2() => Outcome::UpDown,
            Outcome::Unresolved => Outcome::DownUp,
            o => o,
        }
    }

    /// Columns `t, theta, phi, xi, log_norm, chi`. Writes only the header
    /// when no path was recorded.
    pub fn write_path_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "theta", "phi", "xi", "log_norm", "chi"])?;
        for s in self.path.iter().flatten() {
            w.write_record([
                s.t.to_string(),
                s.theta.to_string(),
                s.phi.to_string(),
                s.xi.to_string(),
                s.log_norm.to_string(),
                s.chi.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

fn pole_outcome<T: Real>(theta: T, threshold: T) -> Option<Outcome> {
    if theta <= threshold {
        Some(Outcome::UpDown)
    } else if theta >= T::PI() - threshold {
        Some(Outcome::DownUp)
    } else {
        None
    }
}

fn sample<T: Real>(t: T, s: &BlochState<T>, chi: T) -> PathSample<T> {
    PathSample {
        t,
        theta: s.theta,
        phi: s.phi,
        xi: s.xi,
        log_norm: s.log_norm,
        chi,
    }
}

/// Integrates one trajectory until it enters a pole region or runs out of
/// steps, drawing the field from `schedule`.
pub fn integrate_with<T: Real, S: ChiSchedule<T>>(
    initial: BlochState<T>,
    params: &ModelParams<T>,
    mut schedule: S,
    integ: &IntegratorConfig<T>,
) -> Result<TrajectoryRecord<T>> {
    let mut record = TrajectoryRecord {
        theta0: initial.theta,
        phi0: initial.phi,
        outcome: Outcome::Unresolved,
        steps_used: 0,
        final_state: initial,
        path: (integ.record_stride > 0).then(Vec::new),
    };
    // Exact poles are fixed points of the flow.
    if initial.theta == T::zero() || initial.theta == T::PI() {
        record.outcome = if initial.theta == T::zero() {
            Outcome::UpDown
        } else {
            Outcome::DownUp
        };
        return Ok(record);
    }

    let sub_dt = integ.dt / T::from_u32(integ.substeps).unwrap();
    let mut state = initial;
    for step in 0..integ.max_steps {
        let chi = schedule.chi_for_step(step, integ.dt);
        if step == 0 {
            if let Some(path) = record.path.as_mut() {
                path.push(sample(T::zero(), &state, chi));
            }
        }
        let mut hit = None;
        for _ in 0..integ.substeps {
            state = step_rk4(&state, chi, params, sub_dt);
            if !state.is_finite() {
                return Err(Error::NonFinite { step });
            }
            hit = pole_outcome(state.theta, integ.pole_threshold);
            if hit.is_some() {
                break;
            }
        }
        let done = step + 1;
        if let Some(path) = record.path.as_mut() {
            if hit.is_some() || done % integ.record_stride == 0 {
                path.push(sample(T::from_u64(done).unwrap() * integ.dt, &state, chi));
            }
        }
        if let Some(outcome) = hit {
            record.outcome = outcome;
            record.steps_used = done;
            record.final_state = state;
            return Ok(record);
        }
    }
    record.steps_used = integ.max_steps;
    record.final_state = state;
    Ok(record)
}

/// Single collapse run with a live noise source.
pub fn integrate_trajectory<T: Real>(
    theta0: T,
    phi0: T,
    params: &ModelParams<T>,
    noise: &NoiseConfig<T>,
    integ: &IntegratorConfig<T>,
) -> Result<TrajectoryRecord<T>> {
    let source = NoiseSource::new(noise)?;
    integrate_with(BlochState::new(theta0, phi0), params, source, integ)
}
