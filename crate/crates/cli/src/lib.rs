//! Command-line surface for agreement-based OOD accuracy estimation.
//!
//! Exit codes: 0 success, 2 validation error, 3 degenerate-computation
//! error, 4 diagnosis refusal (an ALine prediction attempted while the
//! agreement scatter diagnoses WEAK, without `--force`).

use std::path::PathBuf;

use thiserror::Error;

use aol_core::data::DataError;
use aol_core::estimators::EstimateError;
use aol_core::linefit::FitError;
use aol_core::metrics::MetricError;
use aol_core::synth::SynthError;

pub mod args;
pub mod commands;
pub mod input;
pub mod report;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Refused(String),
}

/// Exit code for validation-style failures.
const EXIT_VALIDATION: i32 = 2;
/// Exit code for data that validates but cannot be computed on.
const EXIT_DEGENERATE: i32 = 3;
/// Exit code for an ALine prediction refused under a WEAK diagnosis.
const EXIT_REFUSED: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Refused(_) => EXIT_REFUSED,
            CliError::Fit(e) => fit_code(e),
            CliError::Estimate(e) => estimate_code(e),
            CliError::Synth(SynthError::OutsideClampRange { .. }) => EXIT_DEGENERATE,
            _ => EXIT_VALIDATION,
        }
    }
}

fn fit_code(e: &FitError) -> i32 {
    match e {
        FitError::DegenerateX | FitError::ZeroRankVariance | FitError::TooManyDiscards { .. } => {
            EXIT_DEGENERATE
        }
        _ => EXIT_VALIDATION,
    }
}

fn estimate_code(e: &EstimateError) -> i32 {
    match e {
        EstimateError::RankDeficient | EstimateError::NonFiniteNll => EXIT_DEGENERATE,
        EstimateError::Fit(inner) => fit_code(inner),
        _ => EXIT_VALIDATION,
    }
}
