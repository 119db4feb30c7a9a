use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable config or missing input files.
    Config(String),
    /// A processing stage failed.
    Stage(String),
    /// Strict sampling check did not pass.
    Sampling(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_SAMPLING: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage(_) => EXIT_STAGE,
            CliError::Sampling(_) => EXIT_SAMPLING,
        }
    }

    pub fn stage(context: &str, err: impl fmt::Display) -> Self {
        CliError::Stage(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Stage(m) => write!(f, "stage failed: {m}"),
            CliError::Sampling(m) => write!(f, "sampling check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spectracube::Error> for CliError {
    fn from(e: spectracube::Error) -> Self {
        CliError::Stage(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
