use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants split into two families: validation failures (malformed input,
/// bad labels, broken invariants) and numerical failures where the input is
/// well formed but the requested quantity does not exist.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be positive")]
    ZeroDimension,

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("amplitude is not finite")]
    NonFinite,

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("projector is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("projector is not idempotent (deviation {0:e})")]
    NotIdempotent(f64),

    #[error("projectors for outcomes `{first}` and `{second}` are not orthogonal (deviation {deviation:e})")]
    NotOrthogonal {
        first: String,
        second: String,
        deviation: f64,
    },

    #[error("projectors do not sum to the identity (deviation {0:e})")]
    Incomplete(f64),

    #[error("measurement has no outcomes")]
    EmptyMeasurement,

    #[error("duplicate outcome label `{0}`")]
    DuplicateLabel(String),

    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error(
        "ABL denominator vanishes ({denominator:e}) for measurement `{measurement}`: \
         this pre/post pair cannot occur with that intervening measurement"
    )]
    VanishingDenominator {
        measurement: String,
        denominator: f64,
    },

    #[error("run count must be at least 1")]
    EmptyRun,

    #[error("no actual-world system has post-selection outcome `{0}`")]
    EmptySelection(String),

    #[error("paired run set is malformed: {0}")]
    MalformedPairing(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures where the inputs were valid but the quantity is
    /// undefined (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::VanishingDenominator { .. } | Error::EmptySelection(_)
        )
    }

    pub(crate) fn parse(input: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
