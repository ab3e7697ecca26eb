use thiserror::Error;

use crate::ids::{CarrierId, UeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UtilityError {
    #[error("rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("rate must be strictly positive here (the log-slope diverges at 0), got {0}")]
    NonPositiveRate(f64),
    #[error("invalid utility parameter {name} = {value}: must be finite and > 0")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("UE {ue}: no price quote for in-range carrier {carrier}")]
    MissingQuote { ue: UeId, carrier: CarrierId },
    #[error("UE {ue}: received quote from carrier {carrier} which is not in range")]
    UnexpectedQuote { ue: UeId, carrier: CarrierId },
    #[error("carrier {carrier}: price {price} is not a positive finite number")]
    InvalidPrice { carrier: CarrierId, price: f64 },
    #[error("carrier {carrier}: no bid from covered UE {ue}")]
    MissingBid { carrier: CarrierId, ue: UeId },
    #[error("carrier {carrier}: bid from UE {ue} which it does not cover")]
    UnexpectedBid { carrier: CarrierId, ue: UeId },
    #[error("carrier {carrier}: bid from UE {ue} must be finite and >= 0, got {amount}")]
    InvalidBid { carrier: CarrierId, ue: UeId, amount: f64 },
    #[error("carrier {0}: final allocation requested before the carrier stopped")]
    NotStopped(CarrierId),
}

/// Scenario validation failure; lists every violation found, not just the first.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid scenario: {}", .0.join("; "))]
pub struct ValidationError(pub Vec<String>);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("window {window} is larger than the trace ({available} iterations)")]
    WindowTooLarge { window: usize, available: usize },
    #[error("window must be at least 1")]
    EmptyWindow,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("infeasible allocation: {}", .0.join("; "))]
    Infeasible(Vec<String>),
    #[error("grid has about {points:.3e} points, above the limit of {limit:.0e}; use a coarser resolution")]
    GridTooLarge { points: f64, limit: f64 },
    #[error("resolution must be finite and > 0, got {0}")]
    BadResolution(f64),
    #[error("no feasible grid point: every user needs at least one grid step of rate")]
    NoFeasiblePoint,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
}
