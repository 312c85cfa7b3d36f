use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("degenerate popularity: restricted popularity of user {user} sums to zero")]
    DegeneratePopularity { user: u32 },

    #[error("incomplete allocation: no rate for (user {user}, file {file})")]
    IncompleteAllocation { user: u32, file: u32 },

    #[error("inconsistent allocation: {0}")]
    Inconsistent(String),

    #[error("invalid scenario:\n{0}")]
    InvalidScenario(ValidationReport),

    #[error("invalid cache scheme:\n{0}")]
    InvalidScheme(ValidationReport),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("search budget exceeded: {count} assignments exceed the limit of {limit}")]
    SearchBudget { count: u128, limit: u128 },

    #[error("oracle scale guard: {0}")]
    OracleScale(String),

    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 3,
            Error::SearchBudget { .. } | Error::OracleScale(_) => 4,
            Error::Io { .. } => 5,
            _ => 2,
        }
    }
}
