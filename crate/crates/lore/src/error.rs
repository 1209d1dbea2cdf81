//! Crate-wide error type.

use std::fmt;

/// Errors produced by every module in the crate.
///
/// IO-adjacent variants carry rendered messages instead of source errors so
/// the type stays `Clone + PartialEq`, which the test suites lean on.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands had incompatible shapes for `op`.
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// Elementwise division hit a zero denominator at (row, col).
    SingularEntry { row: usize, col: usize },
    /// A parameter or configuration value was outside its documented range.
    InvalidArgument(String),
    /// Member index out of range for an ensemble of `members`.
    MemberIndex { index: usize, members: usize },
    /// Class label at or above the configured class count.
    LabelOutOfRange { label: usize, classes: usize },
    /// A matrix could not be represented at the requested rank.
    RankTooHigh { required: usize, allowed: usize },
    /// A CSV cell failed to parse; positions are zero-based.
    ParseCell { row: usize, col: usize, value: String },
    /// A dataset split came out empty.
    EmptySplit(&'static str),
    /// Schema and data disagree (missing column, count mismatch, ...).
    SchemaMismatch(String),
    Io(String),
    Json(String),
    Csv(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            Error::SingularEntry { row, col } => {
                write!(f, "zero denominator entry at ({row}, {col})")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::MemberIndex { index, members } => {
                write!(f, "member index {index} out of range for {members} members")
            }
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::RankTooHigh { required, allowed } => {
                write!(f, "matrix needs rank {required} but only {allowed} is available")
            }
            Error::ParseCell { row, col, value } => {
                write!(f, "unparseable cell {value:?} at row {row}, column {col}")
            }
            Error::EmptySplit(which) => write!(f, "{which} split is empty"),
            Error::SchemaMismatch(msg) => write!(f, "schema mismatch: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
            Error::Json(msg) => write!(f, "json error: {msg}"),
            Error::Csv(msg) => write!(f, "csv error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
