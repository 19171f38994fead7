use thiserror::Error;

/// Errors raised by the toolkit. Validation failures name the violated
/// invariant; runtime failures carry enough context to rerun with a fix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("exact sampler unavailable for {0} (configure a burn-in length)")]
    ExactSamplerUnavailable(&'static str),

    #[error("{0} is not supported for this model family")]
    Unsupported(String),

    #[error("zero vector is not a valid projective state")]
    ZeroDirection,

    #[error("truncation mass {mass:.3e} exceeds budget {budget:.1e}; state_cap must be at least {required_cap}")]
    TruncationBudget {
        mass: f64,
        budget: f64,
        required_cap: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("value {value} out of range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors the CLI reports with the validation exit status.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
