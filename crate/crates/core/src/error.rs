use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed metadata in {}: {message}", path.display())]
    Metadata { path: PathBuf, message: String },

    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("non-finite value at time {row}, frequency {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("doppler alias: {0}")]
    DopplerAlias(String),

    #[error("delay alias: {0}")]
    DelayAlias(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("every region has zero energy")]
    ZeroEnergy,

    #[error("stationarity extent undefined at indices {0:?}")]
    UndefinedExtent(Vec<usize>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that originate in reading or decoding files rather
    /// than in the values they carry.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Metadata { .. } | Error::SizeMismatch { .. }
        )
    }
}
