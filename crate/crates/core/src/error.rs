use thiserror::Error;

use crate::time::SimTime;

/// Errors raised by linear design and discretization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("sampling period must be positive and finite, got {0}")]
    BadPeriod(f64),
    #[error("matrix exponential produced non-finite entries (ill-conditioned A*h)")]
    NonFinite,
    #[error("pair (Phi, Gamma) is not controllable (singular value ratio {ratio:.3e})")]
    Uncontrollable { ratio: f64 },
    #[error("pole placement supports second-order plants only, got order {0}")]
    UnsupportedOrder(usize),
    #[error("desired poles must be real or a complex-conjugate pair")]
    NonConjugatePoles,
    #[error("closed-loop poles miss the target by {0:.3e}")]
    PlacementCheck(f64),
    #[error("loop cannot track a constant reference: {0}")]
    NoTracking(&'static str),
    #[error("bad plant model: {0}")]
    BadModel(String),
}

/// Top-level error type for simulation runs and configuration handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("event at {event:?} scheduled before current clock {now:?}")]
    Causality { event: SimTime, now: SimTime },
    #[error("controller design failed for loop {}: {source}", .loop_id + 1)]
    Design {
        loop_id: usize,
        #[source]
        source: DesignError,
    },
    #[error("plant state of loop {} became non-finite at t = {time_s} s", .loop_id + 1)]
    NumericalBlowUp { loop_id: usize, time_s: f64 },
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("utilization command {u} below floor {floor}")]
    UtilizationBelowFloor { u: f64, floor: f64 },
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
