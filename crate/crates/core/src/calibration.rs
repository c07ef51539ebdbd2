//! Calibration of the field amplitude `B0` that reproduces Born's rule when
//! the field direction decorrelates during the collapse.
//!
//! Larger `B0` pulls every outcome frequency towards 1/2, so the
//! hemisphere-oriented Born deviation ([`DeviationMetric::OrientedMean`])
//! decreases monotonically in `B0` and its zero can be bisected. Each
//! evaluation reuses the same noise streams (common random numbers), which
//! keeps the objective a deterministic, nearly monotone function of `B0`.

use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::ensemble::{born_deviation, run_ensemble, DeviationMetric};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::noise::{NoiseConfig, NoiseMode};
use crate::scalar::Real;

/// `J hbar / (2 B0^2 N eps tau_r)`: equal to one on the mesoscopic
/// Born relation `J = 2 B0^2 N tau_r` with time measured in units that
/// absorb `eps / hbar`.
pub fn born_relation_quotient<T: Real>(params: &ModelParams<T>, b0: T, tau_r: T) -> T {
    params.j_coupling * params.hbar
        / (T::lit(2.0) * b0 * b0 * params.n() * params.epsilon * tau_r)
}

/// `B0` predicted by the mesoscopic relation for `(J, N, eps, tau_r)`.
pub fn born_relation_b0<T: Real>(params: &ModelParams<T>, tau_r: T) -> T {
    (params.j_coupling * params.hbar / (T::lit(2.0) * params.n() * params.epsilon * tau_r)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    /// Bracket for `B0`.
    pub b0_lo: f64,
    pub b0_hi: f64,
    /// Stop once `b0_hi / b0_lo <= 1 + rel_tol`.
    pub rel_tol: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub b0_star: f64,
    /// Oriented Born deviation at `b0_star`.
    pub deviation: f64,
    pub deviation_lo: f64,
    pub deviation_hi: f64,
    /// Max-abs Born deviation at `b0_star`, for reporting.
    pub max_abs_deviation: f64,
    pub tau_r: f64,
    pub n_spins: u64,
    /// `J hbar / (2 b0_star^2 N eps tau_r)`.
    pub relation_quotient: f64,
    /// Every `(B0, oriented deviation)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

pub fn calibrate_b0<T: Real>(
    params: &ModelParams<T>,
    noise: &NoiseConfig<T>,
    integ: &IntegratorConfig<T>,
    grid: &[T],
    spec: &CalibrationSpec,
) -> Result<CalibrationResult> {
    if noise.mode != NoiseMode::PoissonResample {
        return Err(Error::InvalidParams(vec![
            "calibration requires poisson_resample noise".to_string(),
        ]));
    }
    if !(spec.b0_lo > 0.0 && spec.b0_hi > spec.b0_lo && spec.rel_tol > 0.0) {
        return Err(Error::InvalidParams(vec![format!(
            "need 0 < b0_lo < b0_hi and rel_tol > 0 (got {spec:?})"
        )]));
    }

    let mut evaluations = Vec::new();
    let mut objective = |b0: f64| -> Result<(f64, f64)> {
        let p = params.with_b0(T::lit(b0));
        let stats = run_ensemble(grid, spec.trials, &p, noise, integ)?;
        let oriented = born_deviation(&stats, DeviationMetric::OrientedMean);
        evaluations.push((b0, oriented));
        Ok((oriented, born_deviation(&stats, DeviationMetric::MaxAbs)))
    };

    let (dev_lo, _) = objective(spec.b0_lo)?;
    let (dev_hi, _) = objective(spec.b0_hi)?;
    if !(dev_lo > 0.0 && dev_hi < 0.0) {
        return Err(Error::CalibrationRange {
            b0_lo: spec.b0_lo,
            dev_lo,
            b0_hi: spec.b0_hi,
            dev_hi,
        });
    }

    let (mut lo, mut hi) = (spec.b0_lo, spec.b0_hi);
    while hi / lo > 1.0 + spec.rel_tol {
        let mid = (lo * hi).sqrt();
        if objective(mid)?.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b0_star = (lo * hi).sqrt();
    let (deviation, max_abs_deviation) = objective(b0_star)?;
    let tau_r = noise.tau_r;
    Ok(CalibrationResult {
        b0_star,
        deviation,
        deviation_lo: dev_lo,
        deviation_hi: dev_hi,
        max_abs_deviation,
        tau_r: tau_r.to_f64_lossy(),
        n_spins: params.n_spins,
        relation_quotient: born_relation_quotient(params, T::lit(b0_star), tau_r).to_f64_lossy(),
        evaluations,
    })
}
