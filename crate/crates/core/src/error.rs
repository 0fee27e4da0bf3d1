use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("law is not regularly varying with infinite mean: {0}")]
    NotHeavyTailed(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("product did not converge within {factors} factors (partial value {partial})")]
    BudgetExceeded { partial: f64, factors: u64 },

    #[error("coefficient error bound {bound:e} exceeds requested accuracy {required:e}")]
    Accuracy { bound: f64, required: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
