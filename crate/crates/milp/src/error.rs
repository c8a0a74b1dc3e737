use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{var}` has empty bound interval [{lower}, {upper}]")]
    EmptyBounds { var: String, lower: f64, upper: f64 },
    #[error("variable `{var}` has a NaN bound")]
    NanBound { var: String },
    #[error("row `{row}` has a NaN right-hand side")]
    NanRhs { row: String },
    #[error("row `{row}` references undeclared variable #{index}")]
    UnknownVariable { row: String, index: usize },
    #[error("row `{row}` has a non-finite coefficient")]
    NonFiniteCoefficient { row: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("warm start has {got} values, model has {expected} variables")]
    WarmStartLength { expected: usize, got: usize },
    #[error("unknown solver backend `{0}`")]
    UnknownBackend(String),
}
