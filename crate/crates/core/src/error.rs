use thiserror::Error;

use crate::fock::DensityMatrix;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cutoff {cutoff} too small for mode {mode}: truncated thermal tail weight {tail:.3e} exceeds {tolerance:.1e}")]
    CutoffTooSmall {
        mode: char,
        cutoff: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("invalid moment: {0}")]
    InvalidMoment(String),

    #[error("expectation value of a Hermitian operator has imaginary part {0:.3e}")]
    NonRealExpectation(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("time step did not converge: relative drift {drift:.3e} exceeds tolerance {tolerance:.1e} (dt = {dt})")]
    StepConvergence {
        dt: f64,
        drift: f64,
        tolerance: f64,
        coarse: Box<DensityMatrix>,
        fine: Box<DensityMatrix>,
    },

    #[error("truncation did not converge up to cutoff {cutoff}: relative drift {drift:.3e}")]
    Truncation {
        cutoff: usize,
        drift: f64,
        coarse: Vec<f64>,
        fine: Vec<f64>,
    },

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
