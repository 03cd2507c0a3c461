use std::fmt;

/// CLI failures. Every variant maps to exit status 2.
#[derive(Debug)]
pub enum CliError {
    Config { key: String, message: String },
    Run(bphi::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn config(key: &str, message: String) -> Self {
        Self::Config {
            key: key.to_string(),
            message,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { key, message } => write!(f, "config error at {key}: {message}"),
            Self::Run(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bphi::Error> for CliError {
    fn from(e: bphi::Error) -> Self {
        Self::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
