use std::fmt;
use std::path::Path;
use std::process::ExitCode;

/// Command failures, grouped by the exit code they produce.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; nothing was computed.
    Config(String),
    /// The computation itself failed.
    Domain(surface17::Error),
    Io(String),
    /// An input file is malformed.
    Parse(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// Attach the offending file to a library error.
    pub fn in_file(path: &Path, err: surface17::Error) -> Self {
        match err {
            surface17::Error::Parse { .. } => CliError::Parse(format!("{}: {err}", path.display())),
            surface17::Error::Io(e) => CliError::io(path, e),
            other => CliError::Domain(other),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
            CliError::Parse(_) => 5,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Domain(err) => write!(f, "{err}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl From<surface17::Error> for CliError {
    fn from(err: surface17::Error) -> Self {
        match err {
            surface17::Error::Parse { .. } => CliError::Parse(err.to_string()),
            surface17::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Domain(other),
        }
    }
}
