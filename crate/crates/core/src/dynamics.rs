//! Pointer-state coordinates and the right-hand sides of the collapse ODEs.
//!
//! The two-state pointer wave function is parameterised as
//!
//! ```text
//! |psi> = n e^{i xi/2} ( e^{i phi/2} cos(theta/2) |up,down> + e^{-i phi/2} sin(theta/2) |down,up> )
//! ```
//!
//! and evolves under
//!
//! ```text
//! theta' = -(J N eps / hbar) sin(theta) (cos(theta) - (B0/J) cos(chi))
//! phi'   = -J N cos(theta) / hbar
//! xi'    = 0
//! n'/n   = (J N eps / 2 hbar) cos(theta) (cos(theta) - (B0/J) cos(chi))
//! ```
//!
//! where `chi(t)` is the angle between the stochastic symmetry-breaking
//! field and the quantisation axis. Along any solution `n^2 sin(theta)` is
//! conserved, whatever `chi(t)` does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bloch-sphere coordinates of the pointer state plus norm and global phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState<T> {
    /// Relative-weight angle, kept in `[0, pi]`.
    pub theta: T,
    /// Relative phase, wrapped to `[-pi, pi)`.
    pub phi: T,
    /// Overall phase.
    pub xi: T,
    /// Natural log of the wave-function norm.
    pub log_norm: T,
}

impl<T: Real> BlochState<T> {
    /// Unit-norm state with zero overall phase.
    pub fn new(theta: T, phi: T) -> Self {
        Self {
            theta,
            phi,
            xi: T::zero(),
            log_norm: T::zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.phi.is_finite()
            && self.xi.is_finite()
            && self.log_norm.is_finite()
    }

    /// `ln(n^2 sin(theta))`, the logarithm of the conserved quantity.
    pub fn log_conserved(&self) -> T {
        self.log_norm + self.log_norm + self.theta.sin().ln()
    }
}

/// Physical constants of the antiferromagnetic pointer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams<T> {
    /// Exchange coupling `J > 0`.
    pub j_coupling: T,
    /// Amplitude of the symmetry-breaking field `B0 >= 0`.
    pub b0: T,
    /// Number of spins `N` (even, at least 2).
    pub n_spins: u64,
    /// Strength of the non-unitary perturbation.
    pub epsilon: T,
    pub hbar: T,
}

impl<T: Real> ModelParams<T> {
    /// Parameters with `hbar = 1`.
    pub fn new(j_coupling: T, b0: T, n_spins: u64, epsilon: T) -> Self {
        Self {
            j_coupling,
            b0,
            n_spins,
            epsilon,
            hbar: T::one(),
        }
    }

    /// `J = 1`, `N = 100`, `eps = 0.01`, `hbar = 1`: the collapse rate is one,
    /// so times are measured in units of the collapse time and `B0 = b`.
    pub fn dimensionless(b: T) -> Self {
        Self::new(T::one(), b, 100, T::lit(0.01))
    }

    pub fn n(&self) -> T {
        T::from_u64(self.n_spins).expect("spin count representable")
    }

    /// `J N eps / hbar`.
    pub fn collapse_rate(&self) -> T {
        self.j_coupling * self.n() * self.epsilon / self.hbar
    }

    /// `b = B0 / J`.
    pub fn field_ratio(&self) -> T {
        self.b0 / self.j_coupling
    }

    /// `J N / hbar`, the unitary precession rate of the relative phase.
    pub fn precession_rate(&self) -> T {
        self.j_coupling * self.n() / self.hbar
    }

    /// Crossover correlation time `hbar / (2 J N eps)` between the
    /// mesoscopic and macroscopic regimes.
    pub fn crossover_time(&self) -> T {
        T::one() / (T::lit(2.0) * self.collapse_rate())
    }

    pub fn with_b0(mut self, b0: T) -> Self {
        self.b0 = b0;
        self
    }

    pub fn with_n_spins(mut self, n_spins: u64) -> Self {
        self.n_spins = n_spins;
        self
    }

    /// Lists every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.j_coupling.is_finite() && self.j_coupling > T::zero()) {
            errs.push(format!("j_coupling must be finite and > 0 (got {})", self.j_coupling));
        }
        if !(self.b0.is_finite() && self.b0 >= T::zero()) {
            errs.push(format!("b0 must be finite and >= 0 (got {})", self.b0));
        }
        if self.n_spins < 2 || !self.n_spins.is_multiple_of(2) {
            errs.push(format!("n_spins must be even and >= 2 (got {})", self.n_spins));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= T::zero()) {
            errs.push(format!("epsilon must be finite and >= 0 (got {})", self.epsilon));
        }
        if !(self.hbar.is_finite() && self.hbar > T::zero()) {
            errs.push(format!("hbar must be finite and > 0 (got {})", self.hbar));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }
}

/// `sin(theta)` with exact zeros at the poles, so both poles are exact
/// fixed points in floating point.
#[inline]
fn pole_sin<T: Real>(theta: T) -> T {
    if theta == T::zero() || theta == T::PI() {
        T::zero()
    } else {
        theta.sin()
    }
}

/// `cos(theta) - b cos(chi)`: its sign selects the collapse direction.
#[inline]
pub fn drive<T: Real>(theta: T, b: T, chi: T) -> T {
    theta.cos() - b * chi.cos()
}

pub fn theta_dot<T: Real>(state: &BlochState<T>, params: &ModelParams<T>, chi: T) -> T {
    let s = pole_sin(state.theta);
    -params.collapse_rate() * s * drive(state.theta, params.field_ratio(), chi)
}

/// Independent of `eps`, `B0` and `chi`.
pub fn phi_dot<T: Real>(state: &BlochState<T>, params: &ModelParams<T>) -> T {
    -params.precession_rate() * state.theta.cos()
}

pub fn xi_dot<T: Real>() -> T {
    T::zero()
}

pub fn log_norm_dot<T: Real>(state: &BlochState<T>, params: &ModelParams<T>, chi: T) -> T {
    let c = state.theta.cos();
    params.collapse_rate() / T::lit(2.0) * c * drive(state.theta, params.field_ratio(), chi)
}

/// All four rates packed into a `BlochState`-shaped tangent vector.
pub fn rates<T: Real>(state: &BlochState<T>, params: &ModelParams<T>, chi: T) -> BlochState<T> {
    // Share the trig evaluations between theta' and ln(n)'.
    let (s, c) = state.theta.sin_cos();
    let s = if state.theta == T::zero() || state.theta == T::PI() {
        T::zero()
    } else {
        s
    };
    let rate = params.collapse_rate();
    let d = c - params.field_ratio() * chi.cos();
    BlochState {
        theta: -rate * s * d,
        phi: -params.precession_rate() * c,
        xi: T::zero(),
        log_norm: rate / T::lit(2.0) * c * d,
    }
}

/// Fixed points of the `theta` flow for a frozen field direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSet<T> {
    pub poles: [T; 2],
    /// Unstable interior fixed point `arccos(b cos chi)`, when it exists.
    pub interior: Option<T>,
}

impl<T> FixedPointSet<T> {
    pub fn interior_exists(&self) -> bool {
        self.interior.is_some()
    }
}

pub fn interior_fixed_point<T: Real>(params: &ModelParams<T>, chi: T) -> FixedPointSet<T> {
    let target = params.field_ratio() * chi.cos();
    let interior = if target.abs() <= T::one() {
        Some(target.acos())
    } else {
        None
    };
    FixedPointSet {
        poles: [T::zero(), T::PI()],
        interior,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample<T> {
    pub theta: T,
    pub chi: T,
    pub theta_dot: T,
}

/// `theta_dot` on `theta_count` evenly spaced angles spanning `[0, pi]`
/// (both poles included), once per `chi` value.
pub fn flow_grid<T: Real>(
    params: &ModelParams<T>,
    theta_count: usize,
    chi_values: &[T],
) -> Vec<FlowSample<T>> {
    assert!(theta_count >= 2, "flow grid needs at least two theta samples");
    let last = T::from_usize(theta_count - 1).unwrap();
    let mut out = Vec::with_capacity(theta_count * chi_values.len());
    for &chi in chi_values {
        for i in 0..theta_count {
            let theta = if i == theta_count - 1 {
                T::PI()
            } else {
                T::PI() * T::from_usize(i).unwrap() / last
            };
            let state = BlochState::new(theta, T::zero());
            out.push(FlowSample {
                theta,
                chi,
                theta_dot: theta_dot(&state, params, chi),
            });
        }
    }
    out
}

/// Probability of collapsing onto `|up,down>` when the field direction is
/// frozen for the whole collapse and drawn from the stationary density
/// `sin(chi)/2`: `(1 + (J/B0) cos(theta0)) / 2`, clamped to `[0, 1]`.
///
/// With `B0 = 0` the outcome is deterministic and
/// [`Error::DegenerateField`] carries the step-function value.
pub fn macroscopic_probability<T: Real>(theta0: T, params: &ModelParams<T>) -> Result<T> {
    let c = theta0.cos();
    if params.b0 == T::zero() {
        let step_value = if c > T::zero() {
            1.0
        } else if c < T::zero() {
            0.0
        } else {
            0.5
        };
        return Err(Error::DegenerateField { step_value });
    }
    let half = T::lit(0.5);
    let p = half * (T::one() + c / params.field_ratio());
    Ok(p.max(T::zero()).min(T::one()))
}

/// `cos^2(theta0 / 2)`, the Born weight of `|up,down>`.
pub fn born_weight<T: Real>(theta0: T) -> T {
    let c = (theta0 / T::lit(2.0)).cos();
    c * c
}
