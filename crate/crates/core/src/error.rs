use thiserror::Error;

use crate::integrator::PhaseState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid range. `field` names the offender.
    #[error("{field} {message}")]
    Config { field: String, message: String },

    /// A non-finite value appeared during evaluation.
    #[error("numeric failure{}: {message}", step.map(|k| format!(" at step {k}")).unwrap_or_default())]
    Numeric {
        step: Option<usize>,
        message: String,
        state: Option<Box<PhaseState>>,
    },

    /// The potential does not provide a derivative the operation needs.
    #[error("missing capability: {0}")]
    Capability(String),

    /// The reference ODE integrator could not meet its tolerance.
    #[error("reference flow failed: {0}")]
    Oracle(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric {
            step: None,
            message: message.into(),
            state: None,
        }
    }

    /// Attaches a step index to a numeric error; other variants pass through.
    pub fn at_step(self, k: usize) -> Self {
        match self {
            Error::Numeric { message, state, .. } => Error::Numeric {
                step: Some(k),
                message,
                state,
            },
            other => other,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::Oracle(_))
    }
}
