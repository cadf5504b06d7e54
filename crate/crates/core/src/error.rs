use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The Gaussian transition kernel collapsed (its standard deviation underflowed).
    #[error("degenerate transition kernel at t={t:e}: sigma={sigma:e}")]
    DegenerateTransition { t: f64, sigma: f64 },

    /// The adaptive ODE solver ran out of steps.
    #[error("ODE solver exceeded {max_steps} steps at t={t:e} (stiff problem?)")]
    Stiffness { max_steps: usize, t: f64 },

    /// A loss or estimate became NaN or infinite.
    #[error("non-finite value during {context} (step {step}, t={t:e}, batch index {index})")]
    NonFinite {
        context: &'static str,
        step: usize,
        t: f64,
        index: usize,
    },

    /// Inverse-CDF sampling of the time proposal failed.
    #[error("inverse CDF failed for u={u}")]
    InverseCdf { u: f64 },

    /// Invalid input data (for example an out-of-range discrete level).
    #[error("invalid input: {0}")]
    Input(String),

    /// The operation is not defined for this object.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Checkpoint header disagrees with what the caller expected.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
