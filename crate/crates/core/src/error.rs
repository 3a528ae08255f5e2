use crate::solver::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("no region assignment admits a feasible trajectory")]
    Infeasible,

    /// The node or time budget ran out. The best incumbent found so far, if
    /// any, is carried along together with the remaining optimality gap.
    #[error("budget exceeded after {nodes} branch-and-bound nodes (gap {gap:e})")]
    BudgetExceeded {
        incumbent: Option<Box<Solution>>,
        gap: f64,
        nodes: usize,
    },

    #[error("enumeration guard exceeded: {count} assignments (limit {limit})")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn index(msg: impl Into<String>) -> Self {
        Error::IndexOutOfRange(msg.into())
    }
}
