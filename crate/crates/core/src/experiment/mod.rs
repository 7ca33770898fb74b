//! Experiment drivers: the λ × β sweep over shuffled tabular data and
//! block-based image quantization.

pub mod quantize;
pub mod sweep;

use thiserror::Error;

use crate::dataio::DataError;
use crate::error::ErrorKind;
use crate::metrics::MetricsError;
use crate::solver::SolverError;

pub use quantize::{compression_ratio, quantize, QuantizeConfig, QuantizeResult};
pub use sweep::{
    initial_lambda, run_sweep, write_sweep_csv, BetaGrid, FKind, SweepCell, SweepConfig,
    SweepResult,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error("the data set has no true labels")]
    MissingLabels,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("writing results: {0}")]
    Output(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ExperimentError::Solver(e) => crate::Error::Solver(e.clone()).kind(),
            ExperimentError::Output(_) => ErrorKind::Input,
            _ => ErrorKind::Input,
        }
    }
}

/// Formats `v` with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}
