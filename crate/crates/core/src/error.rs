use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    Dimension {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("invalid generator parameters: {0}")]
    BadParams(String),

    #[error("plant window [{position}, {position}+{len}) must lie within state words 1..{n}")]
    PlantRange {
        position: usize,
        len: usize,
        n: usize,
    },

    #[error("state must have exactly {expected} words, got {got}")]
    StateLength { expected: usize, got: usize },

    #[error("constraint window of {window} words exceeds the {limit}-word equidistribution bound")]
    WindowTooLarge { window: usize, limit: usize },

    #[error("event set must not be empty")]
    EmptyEvents,

    #[error(
        "expectation 2^-{exponent} is below 2^-{limit}; empirical trials would be \
         uninformative at this scale. Use the exact rank calculator, or enable the \
         long-run mode to force the run."
    )]
    TrialsRefused { exponent: u32, limit: u32 },

    #[error("malformed histogram CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
