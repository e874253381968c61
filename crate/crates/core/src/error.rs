use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("empty input: no runs found")]
    EmptyInput,

    #[error("invalid array: {0}")]
    InvalidArray(String),

    #[error("column index {index} out of range for an array with {factors} factors")]
    ColumnOutOfRange { index: usize, factors: usize },

    #[error("column index {0} listed more than once")]
    DuplicateColumn(usize),

    #[error("column subset must not be empty")]
    EmptySubset,

    #[error("projection size {t} out of range 1..={factors}")]
    ProjectionSizeOutOfRange { t: usize, factors: usize },

    #[error("contrast set is for {expected} levels but factor {factor} has {found}")]
    LevelMismatch {
        factor: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid contrast matrix: {0}")]
    InvalidContrasts(String),

    #[error("unknown coding scheme `{0}` (expected polynomial, helmert, dummy or custom)")]
    UnknownScheme(String),

    #[error("operation requires orthogonal contrast coding, got {0}")]
    NonOrthogonalCoding(String),

    /// The response columns are not orthogonal contrasts, so the R² sum does
    /// not equal the projection frequency. The offending sum is carried along.
    #[error("response columns are not orthogonal contrasts (R² sum would be {r2_total})")]
    NonOrthogonalResponse { r2_total: f64 },

    #[error("row count mismatch: {0} vs {1}")]
    RowMismatch(usize, usize),

    #[error("matrix has zero effective rank after centering")]
    ZeroRank,

    #[error("factor {0} does not have exactly two levels")]
    NotTwoLevel(usize),

    #[error("array has strength 0 (some column is unbalanced); resolution is undefined")]
    StrengthZero,

    #[error("no projection onto {resolution} factors exists in a {factors}-factor array (resolution > {factors})")]
    NoProjection { resolution: usize, factors: usize },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
