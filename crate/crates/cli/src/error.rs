use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] graphop_core::Error),

    #[error("acceptance trend violated:\n{0}")]
    Trend(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 2 configuration, 3 numerical failure, 4 trend violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(e) => match e {
                graphop_core::Error::InvalidParameter(_)
                | graphop_core::Error::Parse(_)
                | graphop_core::Error::GammaTooLarge(_)
                | graphop_core::Error::AlphaTooSmall { .. }
                | graphop_core::Error::NotNormalized(_)
                | graphop_core::Error::UnderResolved { .. } => 2,
                _ => 3,
            },
            CliError::Trend(_) => 4,
            CliError::Io(_) => 3,
        }
    }
}
