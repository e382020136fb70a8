use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files.
    #[error("{0}")]
    Usage(String),
    /// A computation failed or a check did not pass.
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<bosefunc::Error> for CliError {
    fn from(e: bosefunc::Error) -> Self {
        match e {
            bosefunc::Error::InvalidArgument(_) | bosefunc::Error::NotRepresentable { .. } | bosefunc::Error::DirectionRequired => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}
