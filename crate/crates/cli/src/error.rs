use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] vsnngp::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Output(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for bad input (files, columns, config), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
