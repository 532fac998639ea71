use thiserror::Error;

/// Errors surfaced by the numerical kernels and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("numeric failure in {what} on a {rows}x{cols} matrix")]
    NumericFailure {
        what: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("matrix is not positive semi-definite: smallest eigenvalue {lambda_min:.3e}")]
    NotPsd { lambda_min: f64 },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("model is degenerate: {0}")]
    ModelDegenerate(String),

    #[error("dense spectrum unavailable: p = {p} exceeds dense cap {cap}")]
    UnsupportedSize { p: usize, cap: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
