use thiserror::Error;

/// Errors raised by the estimation and filtering routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix asymmetry {asymmetry:e} exceeds tolerance {tol:e}")]
    AsymmetryExceedsTol { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("cannot solve against a singular semidefinite matrix (zero pivot at index {index})")]
    Singular { index: usize },

    #[error("design is rank deficient (pivot ratio {ratio:e} below threshold)")]
    RankDeficient { ratio: f64 },

    #[error("measurement sequence is empty")]
    EmptyMeasurementSequence,

    #[error("schedule `{name}` has {len} entries, {needed} are required")]
    ScheduleTooShort {
        name: &'static str,
        len: usize,
        needed: usize,
    },

    #[error("stacked dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("at step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn mismatch(
        context: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// True for failures of numerical certification (as opposed to shape or input errors).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::Singular { .. }
            | Error::RankDeficient { .. }
            | Error::AsymmetryExceedsTol { .. }
            | Error::NonFinite => true,
            Error::AtStep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
