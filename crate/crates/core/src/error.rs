use thiserror::Error;

use crate::dataio::DataError;
use crate::divergence::DivergenceError;
use crate::experiment::ExperimentError;
use crate::fgen::FError;
use crate::influence::InfluenceError;
use crate::matrix::MatrixError;
use crate::metrics::MetricsError;
use crate::solver::SolverError;

/// Whether a failure is the caller's fault or a numerical breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    F(#[from] FError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Influence(#[from] InfluenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn f_kind(e: &FError) -> ErrorKind {
    match e {
        FError::InfiniteWeight | FError::Range { .. } => ErrorKind::Numerical,
        _ => ErrorKind::Input,
    }
}

fn solver_kind(e: &SolverError) -> ErrorKind {
    match e {
        SolverError::F(f) => f_kind(f),
        SolverError::OverlapStall { .. }
        | SolverError::LineSearchFailure { .. }
        | SolverError::SingularHessian { .. }
        | SolverError::OutOfDomain { .. } => ErrorKind::Numerical,
        _ => ErrorKind::Input,
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::F(e) => f_kind(e),
            Error::Solver(e) => solver_kind(e),
            Error::Influence(InfluenceError::SingularG) => ErrorKind::Numerical,
            Error::Influence(InfluenceError::Solver(e)) => solver_kind(e),
            Error::Influence(InfluenceError::F(e)) => f_kind(e),
            Error::Experiment(e) => e.kind(),
            _ => ErrorKind::Input,
        }
    }

    /// Short stable identifier for machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Divergence(_) => "divergence",
            Error::F(_) => "f",
            Error::Matrix(_) => "matrix",
            Error::Solver(_) => "solver",
            Error::Influence(_) => "influence",
            Error::Metrics(_) => "metrics",
            Error::Data(_) => "data",
            Error::Experiment(_) => "experiment",
        }
    }
}
