//! Stability of collapsed states against the fluctuating field.
//!
//! A collapsed state within `delta_theta` of a pole is pushed back out only
//! when the field lands within `delta_theta` of the opposite direction,
//! which happens with probability `sin^2(delta_theta / 2)` per correlation
//! time. Requiring the expected escape time to exceed `tau_u` gives
//! `2 J N eps tau_r >= ln(tau_u / (4 tau_r))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `sin^2(delta_theta / 2)`.
pub fn escape_probability<T: Real>(delta_theta: T) -> T {
    let s = (delta_theta / T::lit(2.0)).sin();
    s * s
}

/// `g(tau_r) = 2 rate tau_r - ln(tau_u / (4 tau_r))`, strictly increasing.
pub fn stability_function<T: Real>(rate: T, tau_r: T, tau_u: T) -> T {
    T::lit(2.0) * rate * tau_r - (tau_u / (T::lit(4.0) * tau_r)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBound<T> {
    /// `J N eps / hbar`.
    pub collapse_rate: T,
    pub tau_u: T,
    /// Smallest correlation time for which collapse is stable over `tau_u`.
    pub tau_r_min: T,
    /// `g(tau_r_min)`.
    pub residual: T,
}

/// Root of [`stability_function`] on `(0, tau_u]`, by bisection on
/// `ln tau_r` (the root can sit many decades below `tau_u`).
pub fn min_correlation_time<T: Real>(collapse_rate: T, tau_u: T) -> Result<StabilityBound<T>> {
    let positive = |x: T| x > T::zero() && x.is_finite();
    if !(positive(collapse_rate) && positive(tau_u)) {
        return Err(Error::InvalidParams(vec![format!(
            "collapse rate and tau_u must be finite and > 0 (got {collapse_rate}, {tau_u})"
        )]));
    }
    let g = |log_tau: T| stability_function(collapse_rate, log_tau.exp(), tau_u);

    let mut hi = tau_u.ln();
    let no_sign_change = |lo: T, hi: T| Error::NoSignChange {
        lo: lo.exp().to_f64_lossy(),
        hi: hi.exp().to_f64_lossy(),
    };
    if !(g(hi) > T::zero()) {
        return Err(no_sign_change(hi, hi));
    }
    // Walk the lower end down until the sign flips.
    let mut width = T::one();
    let mut lo = hi - width;
    while !(g(lo) < T::zero()) {
        width = width + width;
        lo = hi - width;
        if !lo.exp().is_normal() {
            return Err(no_sign_change(lo, hi));
        }
    }

    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == T::zero() {
            lo = mid;
            hi = mid;
            break;
        }
        if gm < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo), g(hi));
    let (root, residual) = if glo.abs() <= ghi.abs() { (lo, glo) } else { (hi, ghi) };
    Ok(StabilityBound {
        collapse_rate,
        tau_u,
        tau_r_min: root.exp(),
        residual,
    })
}

/// Bound for `hbar = 1`: collapse rate `J N eps`.
pub fn stability_min_tau<T: Real>(j: T, n_spins: u64, epsilon: T, tau_u: T) -> Result<StabilityBound<T>> {
    min_correlation_time(j * T::from_u64(n_spins).unwrap() * epsilon, tau_u)
}
