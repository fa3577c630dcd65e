use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {pointer:?}: {message}")]
    Config { pointer: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] htype::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Every error path is a usage or configuration problem; property
    /// failures are reported through a run outcome instead.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
