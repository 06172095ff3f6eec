use std::fmt;
use std::io;

use skykey_core::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NO_DATA: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NoData(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::NoData(_) => EXIT_NO_DATA,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::NoData(m) => write!(f, "no usable data: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NoUsableData(_) | Error::EmptySession => CliError::NoData(msg),
            Error::Io { ref source, .. } if source.kind() == io::ErrorKind::NotFound => CliError::Usage(msg),
            Error::Parameter(_)
            | Error::Parse(_)
            | Error::Scenario(_)
            | Error::InvalidSatellite(_)
            | Error::Csv(_)
            | Error::Json(_) => CliError::Usage(msg),
            _ => CliError::Failure(msg),
        }
    }
}

/// Wraps an I/O error on `path`.
pub fn io_err(path: &std::path::Path, e: io::Error) -> CliError {
    CliError::from(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
