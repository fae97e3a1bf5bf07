use thiserror::Error;

use crate::solver::MLassoFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("column {column} has norm {norm}, expected 1 (use the normalizing constructor)")]
    NonUnitColumn { column: usize, norm: f64 },

    #[error("lambda = 0 requires n > p (got n = {n}, p = {p})")]
    Underdetermined { n: usize, p: usize },

    /// The scale estimate collapsed below the configured floor, which happens
    /// for (near) perfect fits.
    #[error("degenerate scale estimate {sigma:e} (floor {floor:e})")]
    DegenerateScale { sigma: f64, floor: f64 },

    /// The solver ran out of sweeps. The last iterate is attached.
    #[error("no convergence after {sweeps} sweeps")]
    MaxSweepsExceeded { sweeps: usize, fit: Box<MLassoFit> },

    #[error("KKT check failed at lambda = {lambda:e}: max violation {violation:e}, scale residual {scale_residual:e}")]
    KktFailure {
        lambda: f64,
        violation: f64,
        scale_residual: f64,
    },

    #[error("no lambda yields exactly {k} nonzero coefficients")]
    NoSuchSparsity { k: usize },

    #[error("angle {0} deg outside [-90, 90)")]
    AngleOutOfRange(f64),

    #[error("at lambda = {lambda:e}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips any [`Error::AtLambda`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLambda { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_lambda(self, lambda: f64) -> Error {
        match self {
            e @ Error::AtLambda { .. } => e,
            e => Error::AtLambda {
                lambda,
                source: Box::new(e),
            },
        }
    }
}
