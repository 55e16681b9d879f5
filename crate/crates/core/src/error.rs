use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no observations")]
    NoObservations,

    #[error("{function}: argument {value} outside domain")]
    Domain { function: &'static str, value: f64 },

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("no convergence after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("degenerate: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
