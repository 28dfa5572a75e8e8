use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("{what} needs {required} arcs but the arc budget is {limit}")]
    ArcBudgetExceeded {
        what: String,
        required: String,
        limit: usize,
    },

    #[error("iterate has {required} branches but the branch budget is {limit}")]
    BranchBudgetExceeded { required: String, limit: usize },

    #[error("branch {index} has slope modulus {slope} which is not expanding")]
    NonExpanding { index: usize, slope: String },

    #[error("system `{system}` is not supported by {operation}")]
    Unsupported { system: String, operation: String },

    #[error("precision budget exhausted: {steps} steps need at least {required_bits} fractional bits, have {available_bits}")]
    PrecisionExhausted {
        steps: usize,
        required_bits: u64,
        available_bits: u64,
    },

    #[error("orbit branch is ambiguous at step {step} (error bound reaches a discontinuity); raise the precision")]
    BranchAmbiguous { step: usize },

    #[error("matrix has an eigenvalue that is a root of unity (order {order})")]
    RootOfUnity { order: u64 },

    #[error("matrix has an eigenvalue of modulus {modulus} on or inside the unit circle")]
    NotExpanding { modulus: f64 },

    #[error("integer overflow in {0}")]
    Overflow(String),

    #[error("density not converged: residual {residual:e} exceeds {tolerance:e}")]
    NotConverged { residual: f64, tolerance: f64 },

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("run exceeded the runtime cap of {seconds} s")]
    RuntimeExceeded { seconds: u64 },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
