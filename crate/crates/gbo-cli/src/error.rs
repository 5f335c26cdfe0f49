use std::fmt;

/// CLI failure split by exit code: usage problems (bad or missing
/// parameters) exit 2, domain problems (solver or I/O failures) exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Domain(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("i/o failure: {e}"))
    }
}

/// Map any library error into the domain bucket.
pub fn domain<E: fmt::Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}
