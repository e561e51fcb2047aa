use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    /// Rows are numbered from 1 after the header.
    #[error("row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("row {row}, column {column:?}: {value:?} is not a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("{0}")]
    InvalidArgs(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] otdr::Error),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::FileNotFound(_) => "FileNotFound",
            CliError::Parse { .. } => "ParseError",
            CliError::NonNumeric { .. } => "NonNumeric",
            CliError::MissingColumn(_) => "MissingColumn",
            CliError::InvalidArgs(_) => "InvalidArgs",
            CliError::Io { .. } => "Io",
            CliError::Model(e) => model_kind(e),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Parse { row, column, .. } | CliError::NonNumeric { row, column, .. } => {
                v["row"] = json!(row);
                v["column"] = json!(column);
            }
            CliError::MissingColumn(c) => v["column"] = json!(c),
            CliError::FileNotFound(p) => v["path"] = json!(p),
            _ => {}
        }
        json!({ "error": v })
    }
}

fn model_kind(e: &otdr::Error) -> &'static str {
    use otdr::Error::*;
    match e {
        DegenerateInput(_) => "DegenerateInput",
        DimensionMismatch(_) => "DimensionMismatch",
        SingularCovariance { .. } => "SingularCovariance",
        SingularLeaveOneOut { .. } => "SingularLeaveOneOut",
        NonFinite(_) => "NonFinite",
        RankDeficient { .. } => "RankDeficient",
        NonPositiveResponse { .. } => "NonPositiveResponse",
        ParamOutOfRange { .. } => "ParamOutOfRange",
        InvalidGrid(_) => "InvalidGrid",
        NotUnit { .. } => "NotUnit",
        ZeroVariance => "ZeroVariance",
        AllZeroSpectrum => "AllZeroSpectrum",
        AllParamsFailed => "AllParamsFailed",
        IncompatibleCriterion { .. } => "IncompatibleCriterion",
        ZeroSlope => "ZeroSlope",
        InvalidConfig(_) => "InvalidConfig",
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
