//! Crate-wide error type and its process exit codes.

use thiserror::Error;

use crate::lab::LabError;
use crate::matching::MatchingError;
use crate::model::ModelError;
use crate::ordering::OrderingError;
use crate::parser::{LookupError, ParseError};
use crate::query::QueryError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_MATCHING: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Lab(#[from] LabError),
}

impl Error {
    /// 2 for invalid input, 3 when no perfect matching exists, 4 when the
    /// equilibrium solver gives up, 5 for anything that indicates a bug.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Lookup(_) | Error::Model(_) | Error::Query(_) => EXIT_INVALID,
            Error::Ordering(OrderingError::NoPerfectMatching { .. }) => EXIT_NO_MATCHING,
            Error::Ordering(OrderingError::NotPerfect) => EXIT_INTERNAL,
            Error::Matching(MatchingError::PerfectMatchingExists) => EXIT_INTERNAL,
            Error::Matching(_) => EXIT_INVALID,
            Error::Lab(LabError::TooManyFailures { .. } | LabError::TooFewDraws { .. }) => EXIT_SOLVER,
            Error::Lab(_) => EXIT_INVALID,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let parse: Error = crate::parser::parse("model {").unwrap_err().into();
        assert_eq!(parse.exit_code(), 2);
        let set = crate::fixtures::load(crate::fixtures::BROKEN);
        let m = set.model("m").unwrap();
        let err: Error = crate::ordering::causal_ordering(m).unwrap_err().into();
        assert_eq!(err.exit_code(), 3);
        let err: Error = LabError::TooManyFailures { failed: 3, total: 4 }.into();
        assert_eq!(err.exit_code(), 4);
        let err: Error = OrderingError::NotPerfect.into();
        assert_eq!(err.exit_code(), 5);
    }
}
