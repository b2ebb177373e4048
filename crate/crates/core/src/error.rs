use std::path::PathBuf;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("instance has no agents or no items")]
    Empty,

    #[error("negative value {value} for agent {agent}, item {item}")]
    NegativeValue { agent: usize, item: usize, value: f64 },

    #[error("non-finite value for agent {agent}, item {item}")]
    NonFiniteValue { agent: usize, item: usize },

    #[error("supply of item {item} must lie in [0, 1], got {value}")]
    InvalidSupply { item: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (best KKT residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("agent {agent} has non-positive surplus {surplus:e}; normalization undefined")]
    DegenerateNormalization { agent: usize, surplus: f64 },

    #[error("assignment is not optimal: KKT violation {violation:e} at agent {agent}, item {item}")]
    NotOptimal { agent: usize, item: usize, violation: f64 },

    #[error("matrix is not decomposable: {0}")]
    NotDecomposable(String),

    #[error("supply of item {item} fell below zero ({amount:e})")]
    SupplyUnderflow { item: usize, amount: f64 },

    #[error("exact computation needs n <= {max}, got {n}")]
    TooLargeForExact { n: usize, max: usize },

    #[error("instance too large to materialize: {0}")]
    TooLarge(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assignment violates constraints: {0}")]
    InfeasibleAssignment(String),
}

impl Error {
    /// True for failures of a numerical routine on valid input (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_)
                | Error::NoConvergence { .. }
                | Error::DegenerateNormalization { .. }
                | Error::NotOptimal { .. }
                | Error::NotDecomposable(_)
                | Error::SupplyUnderflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
