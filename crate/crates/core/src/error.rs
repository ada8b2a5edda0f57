use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}: missing required column `{column}`")]
    MissingColumn { source_name: String, column: String },

    #[error("{source_name}: malformed input: {reason}")]
    Malformed { source_name: String, reason: String },

    #[error("{source_name}:{line}: invalid JSON: {source}")]
    Json {
        source_name: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("duplicate instance (id={id}, lang={lang})")]
    DuplicateInstance { id: String, lang: String },

    #[error("labels disagree across languages for ids: {}", .0.join(", "))]
    LabelConflict(Vec<String>),

    #[error("instances from different tasks cannot share a corpus ({0} vs {1})")]
    MixedTasks(String, String),

    #[error("language `{0}` is not declared in the corpus")]
    UnknownLanguage(String),

    #[error("shuffle scope `{scope}` is not allowed for task `{task}`")]
    ScopeViolation { task: String, scope: String },

    #[error("task mismatch: expected {expected}, found {found}")]
    TaskMismatch { expected: String, found: String },

    #[error("missing predictions for {} ids: {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("duplicate prediction for id `{0}`")]
    DuplicatePrediction(String),

    #[error("unknown label `{label}` for id `{id}`")]
    UnknownLabel { id: String, label: String },

    #[error("label `{0}` is not an NLI label and cannot be collapsed")]
    NotNli(String),

    #[error("invalid answer span for `{id}`: {reason}")]
    InvalidSpan { id: String, reason: String },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("no cells selected: {0}")]
    EmptySelection(String),

    #[error("missing matrix cell ({0}, {1})")]
    MissingCell(String, String),

    #[error("unknown format `{0}`")]
    UnknownFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or structurally broken input,
    /// as opposed to validation failures on well-formed data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MissingColumn { .. }
                | Error::Malformed { .. }
                | Error::Json { .. }
        )
    }
}
