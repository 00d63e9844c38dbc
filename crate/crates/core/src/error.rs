use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("(alpha, beta) = ({alpha}, {beta}) lies in the prohibited area: need beta >= 0 and alpha <= beta")]
    Prohibited { alpha: f64, beta: f64 },

    #[error("rho = {rho} is out of range: {reason}")]
    RhoOutOfRange { rho: f64, reason: &'static str },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("time {t} precedes the kernel's first time index {t0}")]
    TimeBeforeOrigin { t: u64, t0: u64 },

    #[error("functional undefined at x = {x}, t = {t}")]
    UndefinedFunctional { x: f64, t: u64 },

    #[error("the Lamperti point (alpha, beta) = (-1, 0) needs the second-moment ratio rho / E(D^2)")]
    MissingSecondMomentRatio,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("time index overflow")]
    TimeOverflow,

    #[error("submartingale assertion failed: {count} visited states had negative drift")]
    NegativeDrift { count: u64 },

    #[error("too many excluded replicas: {excluded} of {total} ({what})")]
    Exclusions {
        excluded: u64,
        total: u64,
        what: &'static str,
    },

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error("serialization: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, value: impl ToString, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value: value.to_string(),
        reason,
    }
}
