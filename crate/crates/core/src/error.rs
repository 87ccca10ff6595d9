//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or CLI input.
    #[error("config: {0}")]
    Config(String),

    /// A real value fell outside the fixed-point range.
    #[error("fixed-point range: |{value}| exceeds the legal bound {max_abs}")]
    Range { value: f64, max_abs: f64 },

    /// A protocol step received malformed or inconsistent shares.
    #[error("protocol: {0}")]
    Protocol(String),

    /// Share vectors that must line up (same parties, same dimension) do
    /// not.
    #[error("share mismatch: {0}")]
    ShareMismatch(String),

    /// Preprocessing material ran out mid-protocol.
    #[error("dealer tape exhausted: no {kind} left (budget {budget})")]
    TapeExhausted { kind: &'static str, budget: u64 },

    /// A binary tape or transcript file failed to parse.
    #[error("parse: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Range { .. } => 2,
            _ => 3,
        }
    }
}
