use std::path::Path;

use serde_json::json;
use torograph_core::Error as ModelError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_NON_CONVERGENCE: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    /// Malformed input. `row` counts data rows from 1, header excluded.
    #[error("{source_name}: {}{message}", location(*row, column.as_deref()))]
    Parse {
        source_name: String,
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(row: Option<usize>, column: Option<&str>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!("row {r}, column {c}: "),
        (Some(r), None) => format!("row {r}: "),
        (None, Some(c)) => format!("column {c}: "),
        (None, None) => String::new(),
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, message: impl Into<String>) -> Self {
        CliError::Parse {
            source_name: source_name.to_owned(),
            row: None,
            column: None,
            message: message.into(),
        }
    }

    pub(crate) fn parse_at(source_name: &str, row: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        CliError::Parse {
            source_name: source_name.to_owned(),
            row: Some(row),
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Model(e) => match e {
                ModelError::InvalidArgument(_)
                | ModelError::DimensionMismatch { .. }
                | ModelError::AcyclicityViolation { .. } => EXIT_CONFIG,
                ModelError::UndefinedDirection { .. } | ModelError::Singularity | ModelError::Numerical { .. } => {
                    EXIT_NUMERICAL
                }
                ModelError::ConvergenceFailure { .. } => EXIT_NON_CONVERGENCE,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_PARSE => "parse",
            EXIT_NUMERICAL => "numerical",
            EXIT_NON_CONVERGENCE => "non_convergence",
            _ => "config",
        }
    }

    /// Machine-readable form for `--error-json`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut doc = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Parse { row, column, .. } = self {
            doc["row"] = json!(row);
            doc["column"] = json!(column);
        }
        if let CliError::Model(ModelError::ConvergenceFailure {
            iterations,
            gradient_norm,
            objective,
            ..
        }) = self
        {
            doc["iterations"] = json!(iterations);
            doc["gradient_norm"] = json!(gradient_norm);
            doc["objective"] = json!(objective);
        }
        doc
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
