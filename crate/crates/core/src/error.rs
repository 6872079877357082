use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("problem failed validation: {0}")]
    InvalidProblem(String),
    #[error("equality matrix is rank deficient (rank {rank}, need {required})")]
    RankDeficient { rank: usize, required: usize },
    #[error("point is not strictly interior: row {row} has offset {offset:e}")]
    NotInterior { row: usize, offset: f64 },
    #[error("point lies outside the polytope: row {row} violated by {violation:e}")]
    OutsidePolytope { row: usize, violation: f64 },
    #[error("vector lies outside the unit ball (infinity norm {norm})")]
    OutsideBall { norm: f64 },
    #[error("polytope is unbounded along the requested direction")]
    Unbounded,
    #[error("polytope has an empty interior (best margin {margin:e})")]
    EmptyInterior { margin: f64 },
    #[error("constraint set is infeasible")]
    Infeasible,
    #[error("phase-I prediction missed the interior (u_a = {u_a:e})")]
    PredictionMiss { u_a: f64 },
    #[error("basis enumeration needs {subsets} subsets, above the cap of {cap}; use another interior finder")]
    EnumerationCap { subsets: u128, cap: usize },
    #[error("reference vector {index} has zero l1 norm")]
    ZeroReference { index: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("objective does not expose a quadratic model")]
    NotQuadratic,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
