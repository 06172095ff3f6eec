use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no usable data in {0}")]
    NoUsableData(String),
    #[error("decode error in frame at offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },
    #[error("frame is not {expected}")]
    WrongMessage { expected: &'static str },
    #[error("invalid satellite: {0}")]
    InvalidSatellite(String),
    #[error("invalid geometry-free combination: {0}")]
    InvalidCombination(String),
    #[error("satellite {0} not found")]
    SatelliteNotFound(String),
    #[error("no geometry for satellite {sat} in [{start}, {end})")]
    GeometryMissing { sat: String, start: f64, end: f64 },
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("underdetermined fit: {len} samples for degree {degree}")]
    Underdetermined { len: usize, degree: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate series: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("empty session: no slots to average over")]
    EmptySession,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
