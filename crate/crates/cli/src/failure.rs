use std::fmt;
use std::process::ExitCode;

use driveprof_core::{Error, ErrorKind};

/// Failure category; each maps to its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2: bad flags, config file or settings.
    Config(String),
    /// Exit 3: missing or invalid input data.
    Data(String),
    /// Exit 4: numeric or I/O failure during a run.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Runtime(_) => 4,
        })
    }

    pub fn runtime(err: impl fmt::Display) -> Self {
        Failure::Runtime(err.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.kind() {
            ErrorKind::Config => Failure::Config(e.to_string()),
            ErrorKind::Data => Failure::Data(e.to_string()),
            ErrorKind::Runtime => Failure::Runtime(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}
