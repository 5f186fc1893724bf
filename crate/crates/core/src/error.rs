use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("arity error: {0}")]
    Arity(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("inadmissible generator: {0}")]
    InadmissibleGenerator(String),
    /// The weighted scale condition `sum(w) >= 2 max(w)` fails; `margin` is
    /// `sum(w) - 2 max(w)`.
    #[error("infeasible: weighted scales violate sum >= 2*max (margin {margin})")]
    Infeasible { margin: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid certificate: {0}")]
    CertificateInvalid(String),
    /// No grid point reached a nonpositive right side; `suggested_t` is the
    /// first zero of the cosine factor.
    #[error("grid misses a zero of the cosine factor; widen it to include t = {suggested_t}")]
    WidenGrid { suggested_t: f64 },
}

pub type Result<T, E = MixError> = std::result::Result<T, E>;
