use thiserror::Error;

/// Errors raised by simulators, solvers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed trig expression at byte {position}: {message}")]
    TrigParse { position: usize, message: String },

    #[error("config error at `{key}` (line {line}): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("non-finite field after step at t = {time}")]
    BlowUp { time: f64 },

    #[error("schema mismatch: missing column `{0}`")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
