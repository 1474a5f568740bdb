use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid marginal{}: event contribution t = {t} exceeds 1", at_location(*location))]
    InvalidMarginal { location: Option<usize>, t: f64 },

    #[error("mechanism from location {location} ({pauli}) flips detectors {detectors:?} and cannot be decomposed into matchable edges")]
    Undecomposable {
        location: usize,
        pauli: String,
        detectors: Vec<u32>,
    },

    #[error("invalid edge weight: mechanism probability {0} is not below 1/2")]
    InvalidWeight(f64),

    #[error("detector {0} has no path to any other defect or to the boundary")]
    Disconnected(u32),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn at_location(location: Option<usize>) -> String {
    location.map(|l| format!(" at location {l}")).unwrap_or_default()
}
