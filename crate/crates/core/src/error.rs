use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("descriptor kind mismatch: {source_kind} vs {target_kind}")]
    KindMismatch {
        source_kind: &'static str,
        target_kind: &'static str,
    },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no overlap between clouds at the initial transform")]
    NoOverlap,
    #[error("no features extracted from the {0} cloud")]
    NoFeatures(String),
    #[error("crop produced an empty cloud")]
    EmptyCrop,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure comes from the data (nothing to register against),
    /// as opposed to malformed input or configuration.
    pub fn is_registration_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::NoFeatures(_)
                | Error::NoOverlap
                | Error::InsufficientData { .. }
                | Error::DegenerateSample(_)
                | Error::DegenerateInput(_)
                | Error::NumericalFailure(_)
                | Error::EmptyInput(_)
                | Error::EmptyCrop
        )
    }
}
