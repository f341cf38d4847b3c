use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("hypothesis failed: {0}")]
    Hypothesis(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric failure: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    #[error("claimed fixed point is not fixed: |Ty - y| = {0:e}")]
    BadWitness(f64),

    #[error("operator {index} is not in the class T(W) at startup (max <y - Tx, x - Tx>_W = {value:e})")]
    BadOperator { index: usize, value: f64 },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numeric { message: msg.into(), residual }
    }

    pub(crate) fn at(self, iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration { iteration, source: Box::new(e) },
        }
    }

    /// Strips iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of floating-point machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), Error::Numeric { .. })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
