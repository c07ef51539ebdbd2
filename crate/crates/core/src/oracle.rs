//! Amplitude-level reference integrator.
//!
//! Integrates the two-component state `(c_up, c_down)` directly under the
//! mean-field, non-Hermitian generator
//!
//! ```text
//! F = (4J/N)(1 + i eps) (<S_A^z> S_B^z + <S_B^z> S_A^z) + i eps B0 cos(chi) (S_A^z - S_B^z)
//! d|psi>/dt = (i / hbar) F |psi>
//! ```
//!
//! with the sublattice magnetisations `<S_{A,B}^z>` recomputed from the
//! instantaneous amplitudes. Nothing here uses the Bloch-angle equations, so
//! comparing the two integrators checks the reduction to `(theta, phi, xi, n)`.

use num_complex::Complex;

use crate::dynamics::{BlochState, ModelParams};
use crate::error::{Error, Result};
use crate::noise::{ChiSchedule, NoisePath};
use crate::scalar::{wrap_angle, Real};

/// `exp(log_scale) * (c_up |up,down> + c_down |down,up>)`.
///
/// The scale factor is split off after every step so the non-unitary growth
/// or decay of the norm never overflows the stored amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeState<T> {
    pub c_up: Complex<T>,
    pub c_down: Complex<T>,
    pub log_scale: T,
}

impl<T: Real> AmplitudeState<T> {
    pub fn new(c_up: Complex<T>, c_down: Complex<T>) -> Self {
        Self {
            c_up,
            c_down,
            log_scale: T::zero(),
        }
        .rescaled()
    }

    /// Amplitudes of the parameterised state `n e^{i xi/2} (e^{i phi/2} cos(theta/2), e^{-i phi/2} sin(theta/2))`.
    pub fn from_bloch(s: &BlochState<T>) -> Self {
        let two = T::lit(2.0);
        let half_theta = s.theta / two;
        Self {
            c_up: Complex::from_polar(half_theta.cos(), (s.xi + s.phi) / two),
            c_down: Complex::from_polar(half_theta.sin(), (s.xi - s.phi) / two),
            log_scale: s.log_norm,
        }
    }

    fn weights(&self) -> (T, T) {
        (self.c_up.norm_sqr(), self.c_down.norm_sqr())
    }

    fn rescaled(mut self) -> Self {
        let m = self.c_up.norm().max(self.c_down.norm());
        if m > T::zero() && m.is_finite() {
            self.c_up = self.c_up / m;
            self.c_down = self.c_down / m;
            self.log_scale = self.log_scale + m.ln();
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.c_up.re.is_finite()
            && self.c_up.im.is_finite()
            && self.c_down.re.is_finite()
            && self.c_down.im.is_finite()
            && self.log_scale.is_finite()
    }
}

/// `theta = 2 atan2(|c_down|, |c_up|)`, `phi = arg c_up - arg c_down`,
/// `xi = arg c_up + arg c_down`, `ln n = ln sqrt(|c_up|^2 + |c_down|^2)`.
pub fn extract_bloch<T: Real>(amp: &AmplitudeState<T>) -> BlochState<T> {
    let (wu, wd) = amp.weights();
    let (au, ad) = (amp.c_up.arg(), amp.c_down.arg());
    BlochState {
        theta: T::lit(2.0) * amp.c_down.norm().atan2(amp.c_up.norm()),
        phi: wrap_angle(au - ad),
        xi: wrap_angle(au + ad),
        log_norm: amp.log_scale + (wu + wd).ln() / T::lit(2.0),
    }
}

/// Eigenvalues of `(S_A^z, S_B^z)` on the two pointer states.
fn sublattice_spins<T: Real>(params: &ModelParams<T>) -> [(T, T); 2] {
    let quarter = params.n() / T::lit(4.0);
    [(quarter, -quarter), (-quarter, quarter)]
}

/// `(d c_up/dt, d c_down/dt)` for the scaled amplitudes.
fn derivative<T: Real>(
    c: [Complex<T>; 2],
    params: &ModelParams<T>,
    chi: T,
) -> [Complex<T>; 2] {
    let spins = sublattice_spins(params);
    let (wu, wd) = (c[0].norm_sqr(), c[1].norm_sqr());
    let total = wu + wd;
    // Normalised mean-field magnetisations of each sublattice.
    let mag_a = (spins[0].0 * wu + spins[1].0 * wd) / total;
    let mag_b = (spins[0].1 * wu + spins[1].1 * wd) / total;

    let i = Complex::new(T::zero(), T::one());
    let wick = Complex::new(T::one(), params.epsilon);
    let exchange = params.j_coupling * T::lit(4.0) / params.n();
    let field = params.epsilon * params.b0 * chi.cos();
    let prefactor = i / params.hbar;

    let mut out = [Complex::new(T::zero(), T::zero()); 2];
    for (k, &(sa, sb)) in spins.iter().enumerate() {
        let diag = wick * (exchange * (mag_a * sb + mag_b * sa)) + i * (field * (sa - sb));
        out[k] = prefactor * diag * c[k];
    }
    out
}

/// One RK4 step of the amplitude ODE, followed by rescaling.
pub fn step_amplitudes<T: Real>(
    amp: &AmplitudeState<T>,
    chi: T,
    params: &ModelParams<T>,
    dt: T,
) -> AmplitudeState<T> {
    let c = [amp.c_up, amp.c_down];
    let add = |a: [Complex<T>; 2], h: T, k: [Complex<T>; 2]| [a[0] + k[0] * h, a[1] + k[1] * h];
    let half = dt / T::lit(2.0);
    let k1 = derivative(c, params, chi);
    let k2 = derivative(add(c, half, k1), params, chi);
    let k3 = derivative(add(c, half, k2), params, chi);
    let k4 = derivative(add(c, dt, k3), params, chi);
    let two = T::lit(2.0);
    let sixth = dt / T::lit(6.0);
    let next = |j: usize| c[j] + (k1[j] + k2[j] * two + k3[j] * two + k4[j]) * sixth;
    AmplitudeState {
        c_up: next(0),
        c_down: next(1),
        log_scale: amp.log_scale,
    }
    .rescaled()
}

/// Runs `n_steps` amplitude steps; returns all `n_steps + 1` states.
pub fn integrate_amplitudes_with<T: Real, S: ChiSchedule<T>>(
    initial: AmplitudeState<T>,
    params: &ModelParams<T>,
    mut schedule: S,
    dt: T,
    n_steps: u64,
) -> Result<Vec<AmplitudeState<T>>> {
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    let mut amp = initial;
    out.push(amp);
    for step in 0..n_steps {
        let chi = schedule.chi_for_step(step, dt);
        amp = step_amplitudes(&amp, chi, params, dt);
        if !amp.is_finite() {
            return Err(Error::NonFinite { step });
        }
        out.push(amp);
    }
    Ok(out)
}

/// Integrates over the whole horizon of `path` with step `dt`.
pub fn integrate_amplitudes<T: Real>(
    initial: AmplitudeState<T>,
    params: &ModelParams<T>,
    path: &NoisePath<T>,
    dt: T,
) -> Result<Vec<AmplitudeState<T>>> {
    let n = (path.horizon / dt).round().to_u64().unwrap_or(0);
    integrate_amplitudes_with(initial, params, path, dt, n)
}
