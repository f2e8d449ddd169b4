use thiserror::Error;

use crate::lang::LangError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("row selection is empty")]
    EmptySelection,
    #[error("rows do not line up: {0}")]
    RowMismatch(String),
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("no rows selected for class `{0}`")]
    EmptyClassSelection(String),
    #[error("no rows with ground truth `{0}`")]
    NoRowsForClass(String),
    #[error("row `{0}` is not assigned to any partition cell")]
    UncoveredRow(String),
    #[error("embedding set lacks {0}")]
    MissingColumn(&'static str),
    #[error("caption template set is empty")]
    EmptyTemplateSet,
    #[error("template `{0}` must contain exactly one `{{}}` placeholder")]
    BadTemplate(String),
    #[error("no embedding for caption `{0}`")]
    MissingCaptionEmbedding(String),
    #[error("mean caption embedding for `{0}` is the zero vector")]
    ZeroMeanVector(String),
    #[error("zero-shot head needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("unsupported literal in LP clause: {0}")]
    UnsupportedLiteral(String),
    #[error("variable {0} has an infinite bound")]
    UnboundedVariable(usize),
    #[error("simplex broke down: {0}")]
    NumericalBreakdown(String),
    #[error("grid has {0} points, above the 10^7 limit")]
    GridTooLarge(u128),
    #[error("grid oracle supports at most 4 dimensions, got {0}")]
    GridDimension(usize),
    #[error("no table entry for point {0}")]
    MissingPoint(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl Error {
    pub(crate) fn format(path: impl AsRef<std::path::Path>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            msg: err.to_string(),
        }
    }
}
