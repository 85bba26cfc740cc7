use thiserror::Error;

use crate::point_process::ProcessSpec;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window [{0}, {1})")]
    InvalidWindow(f64, f64),

    #[error("invalid process specification: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quantile {u} unreachable: sup of the hitting function is {sup}")]
    UnreachableQuantile { u: f64, sup: f64 },

    #[error("{spec} is not {required}-stationary")]
    Stationarity { spec: String, required: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration budget exceeded ({reason}); count {lower_bound} is only a lower bound")]
    Budget { reason: String, lower_bound: u64 },

    #[error("collection is not disjoint: {0}")]
    Disjointness(String),

    #[error("precondition failed: {hypothesis}: {detail}")]
    Precondition { hypothesis: &'static str, detail: String },

    #[error("claim 2 violated: gain {gain} < 1 from start {start} with uniforms {uniforms:?}")]
    Claim2Violation { start: f64, gain: f64, uniforms: Vec<f64> },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn stationarity(spec: &ProcessSpec, required: &'static str) -> Self {
        Error::Stationarity { spec: spec.to_string(), required }
    }
}
