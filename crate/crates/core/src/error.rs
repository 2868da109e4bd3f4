use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),

    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("image {width}x{height} is smaller than the 16x16 minimum")]
    ImageTooSmall { width: usize, height: usize },

    #[error("pixel buffer holds {found} values, expected {expected}")]
    BufferSize { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no fingerprint area")]
    NoFingerprintArea,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("coincident minutiae have no defined pair attributes")]
    CoincidentPoints,

    #[error("empty template")]
    EmptyTemplate,

    #[error("no consistent pairing")]
    NoConsistentPairing,

    #[error("pairing holds {0} minutia pairs, at least 2 are required")]
    PairingTooSmall(usize),

    #[error("no admissible offset")]
    NoAdmissibleOffset,

    #[error("insufficient calibration data: {0} scores, at least 10 required")]
    InsufficientCalibrationData(usize),

    #[error("calibration scores are all zero")]
    DegenerateCalibration,

    #[error("negative raw score {0} for a non-identity normalizer")]
    NegativeScore(f64),

    #[error("empty score list")]
    EmptyScores,

    #[error("score set needs both genuine and impostor records")]
    OneClass,

    #[error("relative variation needs a positive baseline EER")]
    ZeroBaseline,

    #[error("trial keys differ across matchers: {0}")]
    TrialKeyMismatch(String),

    #[error("no fingers found in {0}")]
    NoFingers(PathBuf),

    #[error("corpus errors:\n{}", .0.join("\n"))]
    Corpus(Vec<String>),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for failures of the operating system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
