//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A score, probability, or parameter was NaN or infinite where a
    /// finite value is required.
    #[error("non-finite value at row {row}, column {col}: {value}")]
    NonFinite { row: usize, col: usize, value: f64 },

    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    /// An operation that needs at least one row was given none.
    #[error("empty input: {context}")]
    EmptyInput { context: String },

    /// A label index is outside `0..class_count`.
    #[error("label {label} at row {row} is out of range for {class_count} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        class_count: usize,
    },

    /// Paired inputs that must describe the same examples disagree.
    #[error("misaligned inputs: {context}")]
    Misaligned { context: String },

    /// A parameter fails its documented precondition.
    #[error("invalid parameter: {context}")]
    InvalidParameter { context: String },

    /// No nonnegative score-marginal weights reproduce the requested class
    /// marginals for a joint table.
    #[error("infeasible joint table: {context}")]
    InfeasibleTable { context: String },

    /// A joint table is too large for exhaustive combiner enumeration.
    #[error("support too large: {cells} cells would enumerate {combiners} combiners (limit {limit})")]
    SupportTooLarge {
        cells: usize,
        combiners: f64,
        limit: usize,
    },

    /// A verification suite was handed a sample from the wrong shift.
    #[error("wrong shift variant: {context}")]
    WrongShiftVariant { context: String },

    /// A shift description string does not match the grammar.
    #[error("unparsable shift spec `{input}`: {context}")]
    ShiftParse { input: String, context: String },
}

impl CoreError {
    pub(crate) fn shape(context: impl Into<String>) -> Self {
        CoreError::ShapeMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn empty(context: impl Into<String>) -> Self {
        CoreError::EmptyInput {
            context: context.into(),
        }
    }

    pub(crate) fn misaligned(context: impl Into<String>) -> Self {
        CoreError::Misaligned {
            context: context.into(),
        }
    }

    pub(crate) fn param(context: impl Into<String>) -> Self {
        CoreError::InvalidParameter {
            context: context.into(),
        }
    }
}
