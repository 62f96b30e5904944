use thiserror::Error;

/// Errors raised while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value is malformed, unknown or out of range.
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    /// A stability guard evaluated on the resolved configuration failed.
    #[error("stability guard `{guard}` violated: value {value:.6e} exceeds limit {limit:.6e}")]
    Guard {
        guard: &'static str,
        value: f64,
        limit: f64,
    },

    /// A runtime invariant (non-negativity, density bounds, L2 growth, far-field decay) failed.
    #[error("invariant `{check}` violated: {detail}")]
    Invariant { check: &'static str, detail: String },

    /// An analysis routine was called with inconsistent arguments.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        SimError::Usage(message.into())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
