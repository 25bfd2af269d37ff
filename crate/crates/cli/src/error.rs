use std::fmt;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Pipeline failure modes, each mapped to a distinct process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Configuration or input problems. Carries every violation found, not
    /// just the first.
    Validation(Vec<String>),
    /// A required artifact does not exist yet; `producer` names the command
    /// that writes it.
    MissingDependency { artifact: String, producer: String },
    Lib(credfuse::Error),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }

    pub fn missing(artifact: impl Into<String>, producer: impl Into<String>) -> Self {
        CliError::MissingDependency { artifact: artifact.into(), producer: producer.into() }
    }

    /// 1 = validation, 2 = missing dependency, 3 = numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::MissingDependency { .. } => 2,
            CliError::Lib(credfuse::Error::Numeric(_)) => 3,
            CliError::Lib(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(violations) => {
                writeln!(f, "invalid configuration or input:")?;
                for v in violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
            CliError::MissingDependency { artifact, producer } => {
                write!(f, "missing artifact {artifact}; run `credfuse {producer}` first")
            }
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<credfuse::Error> for CliError {
    fn from(e: credfuse::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(credfuse::Error::Io(e))
    }
}
