use thiserror::Error;

/// Errors produced by the device models, integrators and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("memristance {r} ohm outside rails [{r_on}, {r_off}]")]
    ResistanceOutOfRange { r: f64, r_on: f64, r_off: f64 },

    #[error("no sign change bracketing a root on [{lo}, {hi}] ({context})")]
    NoBracket { lo: f64, hi: f64, context: String },

    #[error("step size {step:e} fell below the underflow floor at t = {t}")]
    StepUnderflow { t: f64, step: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty voltage grid")]
    EmptyGrid,

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
