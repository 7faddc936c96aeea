use std::path::PathBuf;

use thiserror::Error;

/// One violated instance invariant, as reported by [`crate::model::validate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoEdges,
    NonDenseLeftIds { position: usize, id: usize },
    NonDenseRightIds { position: usize, id: usize },
    InvalidCost { left: usize },
    NonPositiveUtility { left: usize, right: usize },
    DanglingEdge { left: usize, right: usize },
    DuplicateEdge { left: usize, right: usize },
    InvalidBudget,
    InvalidBeta,
    BetaViolated { realized: f64, declared: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NoEdges => write!(f, "no edges"),
            Violation::NonDenseLeftIds { position, id } => {
                write!(f, "left vertex at position {position} has id {id}")
            }
            Violation::NonDenseRightIds { position, id } => {
                write!(f, "right vertex at position {position} has id {id}")
            }
            Violation::InvalidCost { left } => {
                write!(f, "left vertex {left} has a negative or non-finite cost")
            }
            Violation::NonPositiveUtility { left, right } => {
                write!(f, "edge ({left}, {right}) has a non-positive or non-finite utility")
            }
            Violation::DanglingEdge { left, right } => {
                write!(f, "edge ({left}, {right}) references a missing vertex")
            }
            Violation::DuplicateEdge { left, right } => write!(f, "duplicate edge ({left}, {right})"),
            Violation::InvalidBudget => write!(f, "budget must be positive and finite"),
            Violation::InvalidBeta => write!(f, "beta must be finite and at least 1"),
            Violation::BetaViolated { realized, declared } => {
                write!(f, "beta violated: realized {realized} > declared {declared}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid reference: {0}")]
    InvalidReference(String),

    #[error("oracle input too large: {edges} edges exceeds cap {cap}")]
    OracleTooLarge { edges: usize, cap: usize },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
