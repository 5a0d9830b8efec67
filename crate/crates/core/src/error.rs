use thiserror::Error;

/// Errors raised by the model, pricing and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violates a documented precondition.
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// Two grid functions or states that must line up do not.
    #[error("length mismatch for `{field}`: expected {expected}, got {actual}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A covariance matrix could not be turned into a sampling factor.
    #[error("covariance factorization failed: smallest eigenvalue {min_eigenvalue:e} (largest {max_eigenvalue:e})")]
    Factorization { min_eigenvalue: f64, max_eigenvalue: f64 },

    /// A Gram matrix is numerically singular.
    #[error(
        "rank-deficient Gram matrix: direction {direction} has eigenvalue {eigenvalue:e} (largest {max_eigenvalue:e})"
    )]
    RankDeficient {
        direction: usize,
        eigenvalue: f64,
        max_eigenvalue: f64,
    },

    /// A complex logarithm or square root would cross its branch cut.
    #[error("branch cut: {0}")]
    BranchCut(String),

    /// Numerical quadrature did not reach its tolerance.
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// An exponential moment overflowed.
    #[error("overflow: exponent {exponent} is too large")]
    Overflow { exponent: f64 },

    /// A Monte Carlo payoff was not finite.
    #[error("non-finite payoff on path {path_id}")]
    NonFinitePayoff { path_id: usize },

    /// The requested operation does not apply to this model kind.
    #[error("operation `{op}` is not defined for {kind}")]
    KindMismatch { op: &'static str, kind: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_len(field: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                field,
                expected,
                actual,
            })
        }
    }

    /// True for errors that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Factorization { .. }
                | Error::RankDeficient { .. }
                | Error::BranchCut(_)
                | Error::Quadrature { .. }
                | Error::Overflow { .. }
                | Error::NonFinitePayoff { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
