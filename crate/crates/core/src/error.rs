use thiserror::Error;

/// Errors raised by detection, bootstrap and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time series must have at least 2 observations, got {0}")]
    SeriesTooShort(usize),

    #[error("non-finite observation at position {0}")]
    NonFinite(usize),

    #[error("invalid bandwidth ({left}, {right}) for series of length {n}")]
    InvalidBandwidth { left: usize, right: usize, n: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid change-point model: {0}")]
    InvalidModel(String),

    #[error("empty search window for change point {index} at location {location}")]
    EmptyWindow { index: usize, location: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_alpha(name: &'static str, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{alpha} is not in (0, 1)"),
        })
    }
}
