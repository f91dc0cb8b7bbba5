use thiserror::Error;

/// Errors produced anywhere in the benchmark library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("target column `{0}` not found in header")]
    MissingTarget(String),

    #[error("file has no header or no data rows")]
    EmptyFile,

    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("design matrix is singular")]
    SingularDesign,

    #[error("gram matrix X^T X is singular")]
    SingularGram,

    #[error("cholesky factorization failed after jitter escalation to {0:e}")]
    CholeskyFailure(f64),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    DivergedTraining { epoch: usize },

    #[error("model has not been fitted")]
    NotFitted,

    #[error("measure `{measure}` needs a fitted {needs}")]
    MissingModelContext { measure: String, needs: String },

    #[error("k = {k} exceeds the training size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("zero vector has no direction for cosine similarity")]
    ZeroVector,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("window must be odd, got {0}")]
    EvenWindow(usize),

    #[error("window {window} too large for series of length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("dump version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Variant name, for status lines such as `failed(SingularGram: ...)`.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::MissingTarget(_) => "MissingTarget",
            Error::EmptyFile => "EmptyFile",
            Error::RaggedRows { .. } => "RaggedRows",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::DegenerateSplit(_) => "DegenerateSplit",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::InvalidHyperparameter(_) => "InvalidHyperparameter",
            Error::SingularDesign => "SingularDesign",
            Error::SingularGram => "SingularGram",
            Error::CholeskyFailure(_) => "CholeskyFailure",
            Error::DivergedTraining { .. } => "DivergedTraining",
            Error::NotFitted => "NotFitted",
            Error::MissingModelContext { .. } => "MissingModelContext",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::ZeroVector => "ZeroVector",
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::EvenWindow(_) => "EvenWindow",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::VersionMismatch { .. } => "VersionMismatch",
        }
    }
}
