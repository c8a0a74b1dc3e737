use optsort_milp::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {reason}{}", hint.as_ref().map(|h| format!(" (hint: {h})")).unwrap_or_default())]
    Infeasible {
        reason: String,
        hint: Option<String>,
    },
    #[error("solver stopped at a limit without a usable solution")]
    SolverLimit,
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error("i/o error")]
    Io(#[from] std::io::Error),
    #[error("tuning iteration {iteration}")]
    Tuning {
        iteration: usize,
        #[source]
        source: Box<CoreError>,
    },
}

impl CoreError {
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    /// The innermost error, looking through tuning wrappers.
    pub fn root(&self) -> &CoreError {
        match self {
            CoreError::Tuning { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
