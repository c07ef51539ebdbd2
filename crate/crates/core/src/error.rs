use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// One entry per violated constraint.
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    /// `b0 = 0`: no stochastic drive, the outcome is a deterministic step
    /// function of the initial angle. `step_value` is that deterministic
    /// probability for the queried angle.
    #[error("degenerate field (b0 = 0): outcome is deterministic, P = {step_value}")]
    DegenerateField { step_value: f64 },

    #[error("non-finite state at step {step}; time step is likely too large")]
    NonFinite { step: u64 },

    #[error("trajectory {trial} at grid point {point} failed: {source}")]
    Trajectory {
        point: usize,
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "calibration range does not bracket the optimum: deviation {dev_lo} at b0 = {b0_lo}, {dev_hi} at b0 = {b0_hi}"
    )]
    CalibrationRange {
        b0_lo: f64,
        dev_lo: f64,
        b0_hi: f64,
        dev_hi: f64,
    },

    #[error("no sign change of the stability function on the bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("malformed noise path: {0}")]
    NoisePath(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
