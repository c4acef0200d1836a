use std::path::PathBuf;

use thiserror::Error;

use crate::flow::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    /// The linking kernel was evaluated at (numerically) coincident points.
    #[error("singular kernel evaluation: |x - y| = {distance:e}")]
    Singular { distance: f64 },

    /// Two curves (or a curve and a quadrature cell) came closer than the
    /// singular-evaluation floor.
    #[error("curves too close for quadrature: distance {distance:e} below floor {floor:e}")]
    Proximity { distance: f64, floor: f64 },

    #[error("integrator exceeded {steps} steps at t = {t} (target {target})")]
    MaxStepsExceeded {
        steps: usize,
        t: f64,
        target: f64,
        partial: Box<Trajectory>,
    },

    /// The chosen projection direction is not generic for the crossing count.
    #[error("non-generic projection: {0}")]
    NonGeneric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for input-validation failures (as opposed to numerical ones).
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse(_) | Error::Io { .. })
    }
}
