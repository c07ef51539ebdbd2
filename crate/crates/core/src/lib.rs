//! Simulation and analysis of an objective-collapse model for a two-state
//! antiferromagnetic pointer driven by a state-independent stochastic field.
//!
//! * [`dynamics`]: pointer coordinates, ODE right-hand sides, fixed points and
//!   the frozen-field outcome probability.
//! * [`noise`]: the field direction `chi(t)` (frozen, per-step, Poisson
//!   resampled) with reproducible per-trajectory streams.
//! * [`integrator`]: fixed-step RK4 trajectories with pole classification.
//! * [`oracle`]: amplitude-level reference integrator.
//! * [`ensemble`], [`calibration`], [`stability`]: outcome statistics,
//!   Born-rule calibration of the field amplitude and the stability bound on
//!   the correlation time.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod calibration;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod noise;
pub mod oracle;
pub mod scalar;
pub mod stability;

pub use calibration::{born_relation_quotient, calibrate_b0, CalibrationResult, CalibrationSpec};
pub use dynamics::{
    born_weight, flow_grid, interior_fixed_point, log_norm_dot, macroscopic_probability, phi_dot,
    theta_dot, xi_dot, BlochState, FixedPointSet, FlowSample, ModelParams,
};
pub use ensemble::{born_deviation, run_ensemble, DeviationMetric, EnsembleStats, PointStats};
pub use error::{Error, Result};
pub use integrator::{
    integrate_trajectory, integrate_with, step_rk4, IntegratorConfig, Outcome, TrajectoryRecord,
};
pub use noise::{
    make_noise_path, sample_stationary_chi, ChiSchedule, NoiseConfig, NoiseMode, NoisePath,
    NoiseSource,
};
pub use oracle::{extract_bloch, integrate_amplitudes, AmplitudeState};
pub use scalar::Real;
pub use stability::{escape_probability, min_correlation_time, stability_min_tau, StabilityBound};

pub type BlochState64 = BlochState<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type NoiseConfig64 = NoiseConfig<f64>;
pub type NoisePath64 = NoisePath<f64>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type TrajectoryRecord64 = TrajectoryRecord<f64>;
pub type AmplitudeState64 = AmplitudeState<f64>;
pub type StabilityBound64 = StabilityBound<f64>;
