use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    MissingInput(PathBuf),
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
            CliError::Usage(_) => 64,
            CliError::MissingInput(_) => 66,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::MissingInput(p) => write!(f, "input file not found: {}", p.display()),
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<trunc_fpca::Error> for CliError {
    fn from(e: trunc_fpca::Error) -> Self {
        match &e {
            trunc_fpca::Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingInput(PathBuf::from(path))
            }
            trunc_fpca::Error::Io { .. } => CliError::Io(e.to_string()),
            _ if e.is_validation() => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
