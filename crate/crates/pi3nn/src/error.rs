//! Crate-wide error type with stable categories for CLI and FFI consumers.

use thiserror::Error;

/// Everything that can go wrong across data handling, training, and solving.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or dimensionality mismatch between an input and a model/dataset.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: String,
        got: String,
    },

    /// Invalid configuration or argument value.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Problems with input data: files, parsing, non-finite values.
    #[error("{0}")]
    Data(String),

    /// A non-numeric cell in a CSV file, reported with its location.
    #[error("non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumericCell {
        row: usize,
        column: usize,
        value: String,
    },

    /// Requested target column is absent from the CSV header.
    #[error("target column {0:?} not found in header")]
    MissingTargetColumn(String),

    /// A feature or target column is constant and cannot be normalized.
    #[error("column {0:?} is constant and cannot be normalized")]
    ConstantColumn(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    /// Duplicated ratios make the requested exceedance count unreachable.
    #[error(
        "tie error: duplicated ratio {value} makes exceedance count {target_count} unreachable"
    )]
    TiedRatios { value: f64, target_count: usize },

    /// The confidence level needs more exceedances than the residual set holds.
    #[error(
        "infeasible gamma {gamma}: needs {needed} exceedances but only {available} samples available"
    )]
    InfeasibleGamma {
        gamma: f64,
        needed: usize,
        available: usize,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Machine-parsable category token, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape { .. } | Error::InvalidArgument(_) => "config-error",
            Error::Data(_)
            | Error::NonNumericCell { .. }
            | Error::MissingTargetColumn(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => "data-error",
            Error::ConstantColumn(_) => "normalization-error",
            Error::Divergence { .. } => "divergence",
            Error::TiedRatios { .. } => "tie-error",
            Error::InfeasibleGamma { .. } => "infeasible-gamma",
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config-error" => 2,
            "data-error" => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
