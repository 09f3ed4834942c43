use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// A single model-validation failure, tied to a variable and the block it
/// was found in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub variable: String,
    pub block: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// All diagnostics produced by one validation pass.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn push(&mut self, variable: &str, block: &str, message: String) {
        self.0.push(Diagnostic {
            variable: variable.into(),
            block: block.into(),
            message,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Diagnostic> {
        self.0.iter()
    }

    /// True if any diagnostic message equals `message`.
    pub fn contains(&self, message: &str) -> bool {
        self.0.iter().any(|d| d.message == message)
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl core::error::Error for Diagnostics {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {line}:{column} near `{found}`: {message}")]
    Syntax {
        line: usize,
        column: usize,
        found: String,
        message: String,
    },
    #[error("duplicate {kind} name `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("unknown block name `{0}`")]
    UnknownBlock(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Invalid(Diagnostics),
    #[error("invalid {dist} parameters: {reason}")]
    InvalidDistribution { dist: &'static str, reason: String },
    #[error("non-finite value in `{variable}` after {block} at t = {time}")]
    NonFinite {
        block: &'static str,
        variable: String,
        time: f64,
    },
    #[error("missing value for input `{name}` at t = {time}")]
    MissingInput { name: String, time: f64 },
    #[error("model is not linear-Gaussian ({block} block, `{variable}`): {reason}")]
    NonlinearModel {
        block: &'static str,
        variable: String,
        reason: String,
    },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("all particle weights are zero at t = {time}")]
    DegenerateEnsemble { time: f64 },
    #[error("all weights are zero")]
    ZeroWeights,
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<Diagnostics> for Error {
    fn from(d: Diagnostics) -> Self {
        Error::Invalid(d)
    }
}
