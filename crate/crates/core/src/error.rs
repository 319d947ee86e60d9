use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("depth {y} outside the domain of {what}")]
    Domain { what: &'static str, y: f64 },
    #[error("clock {t} outside the recorded path [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("hazard stayed below {target} up to t = {t_max}; density is not bounded below along the flight")]
    BracketCap { target: f64, t_max: f64 },
    #[error("root finder did not converge: {0}")]
    NoConvergence(String),
    #[error("Bessel dimension {delta} is not sampleable")]
    NotSampleable { delta: f64 },
    #[error("path left [1e-9, 1e9] at t = {t} (y = {y})")]
    BlowUp { t: f64, y: f64 },
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
