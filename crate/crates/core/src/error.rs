use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("non-contiguous segments: {0}")]
    NonContiguousSegments(String),

    #[error("incompatible segments: {0}")]
    IncompatibleSegments(String),

    #[error("invalid media: {0}")]
    InvalidMedia(String),

    #[error("not a Y4M stream")]
    NotY4m,

    #[error("truncated stream: {0}")]
    TruncatedStream(String),

    #[error("unsupported Y4M stream: {0}")]
    UnsupportedY4m(String),

    #[error("incompatible frames: {0}")]
    IncompatibleFrames(String),

    #[error("not a WAV file")]
    NotWav,

    #[error("unsupported WAV variant: {0}")]
    UnsupportedWav(String),

    #[error("truncated WAV file: {0}")]
    TruncatedWav(String),

    #[error("invalid embedding file: {0}")]
    InvalidEmbeddingFile(String),

    #[error("embedding count mismatch: expected {expected}, found {found}")]
    EmbeddingCountMismatch { expected: usize, found: usize },

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    FeatureDimensionMismatch { expected: usize, found: usize },

    #[error("provider failure ({context}): {message}")]
    Provider { context: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank bound exceeded: requested {requested} components, at most {max} allowed")]
    RankBoundExceeded { requested: usize, max: usize },

    #[error("degenerate labels: both classes are required")]
    DegenerateLabels,

    #[error("invalid feature: {0}")]
    InvalidFeature(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate fold composition: {0}")]
    DegenerateFold(String),

    #[error("censoring appropriate segment {0}")]
    CensoringAppropriateSegment(usize),

    #[error("malformed XML: {0}")]
    MalformedXml(String),

    #[error("invalid report: {0}")]
    InvalidReport(String),

    #[error("invalid model bundle: {0}")]
    InvalidBundle(String),

    #[error("manifest errors:\n  {}", .0.join("\n  "))]
    Manifest(Vec<String>),

    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure was caused by the caller's inputs rather than by
    /// a bug or an environment problem.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Internal(_) => false,
            Error::Segment { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}
