use std::path::PathBuf;

use thiserror::Error;

use crate::pfr::RemovalTrace;

pub type Result<T, E = PfrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PfrError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Invalid configuration. `field` is the dotted path of the offending key.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Only one label class is present where two are required.
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// A privileged or unprivileged group has no members.
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("model has no feature columns")]
    EmptyModel,

    /// The removal loop ran out of columns (or hit its removal cap) before the
    /// sensitive-attribute AUC dropped to the threshold, or a model was asked to
    /// train on zero columns. Carries the partial trace when there is one.
    #[error("features exhausted for `{sensitive}`{}", describe_partial(trace.as_deref()))]
    ExhaustedFeatures {
        sensitive: String,
        trace: Option<Box<RemovalTrace>>,
    },
}

fn describe_partial(trace: Option<&RemovalTrace>) -> String {
    match trace {
        Some(t) => format!(
            ": {} removals, auc {:.4} still above tau {:.4}",
            t.steps.len(),
            t.final_auc,
            t.tau
        ),
        None => String::new(),
    }
}

impl PfrError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        PfrError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            PfrError::Io { .. }
            | PfrError::Csv(_)
            | PfrError::Config { .. }
            | PfrError::Schema(_)
            | PfrError::UnsupportedTarget(_)
            | PfrError::Validation(_) => 1,
            PfrError::ExhaustedFeatures { .. } => 3,
            _ => 2,
        }
    }
}
