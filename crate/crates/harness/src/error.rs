use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad preset, config file or option value.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] wsg_core::Error),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl HarnessError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    /// Process exit status: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(wsg_core::Error::InvalidConfig(_)) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
