use thiserror::Error;

/// Errors produced by the optimisation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A material CSV row (or header) could not be decoded.
    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// Input decoded fine but violates a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A wavelength was requested outside the tabulated range of a material.
    #[error("material '{material}' has no data at {wavelength_nm} nm (valid range {min_nm}-{max_nm} nm)")]
    OutOfRange {
        material: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    /// Non-finite or out-of-bounds intermediate value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A caller broke an operation precondition (bad action index, wrong dimensions, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::OutOfRange { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
