use thiserror::Error;

/// Errors produced by the analytic and Monte-Carlo pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is outside its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function argument lies outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A delay that does not land on the waveform's fine grid.
    #[error("delay {tau:e} s is not a multiple of the fine-grid step {step:e} s")]
    OffGrid { tau: f64, step: f64 },

    /// A covariance matrix stayed singular after regularization.
    #[error("singular covariance at snapshot {snapshot}: smallest eigenvalue {min_eig:e}")]
    SingularCovariance { snapshot: usize, min_eig: f64 },

    /// A Fisher information matrix could not be inverted.
    #[error("{which} Fisher information matrix is singular")]
    SingularFim { which: &'static str },

    /// A normalized correlation entry fell outside [-1, 1] beyond rounding.
    #[error("normalized correlation [{row},{col}] = {value} outside [-1, 1]")]
    Correlation { row: usize, col: usize, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
