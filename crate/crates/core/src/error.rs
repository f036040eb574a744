use thiserror::Error;

/// Errors raised by the sensing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("{name} = {value} is out of range: expected {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("probability {0} is on the boundary of [0, 1]; the inverse Q-function diverges there")]
    BoundaryProbability(f64),

    #[error("weight eta = {eta} lies outside the clamped interval [{floor}, {ceil}]")]
    EtaOutOfRange { eta: f64, floor: f64, ceil: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "> 0",
        })
    }
}
