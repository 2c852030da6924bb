use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("tree exceeded the node budget ({0} visits)")]
    BudgetExceeded(u64),
    #[error("exponential marks need large-jump records from a subordinated motion")]
    MissingJumpRecords,
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("motions cannot share randomness: {0}")]
    Uncouplable(String),
    #[error("flow extinct: t = {t} is past the extinction time {extinction}")]
    FlowExtinct { t: f64, extinction: f64 },
    #[error("normal direction undefined at {0:?}")]
    NormalUndefined(Vec<f64>),
    #[error("time step {dt} violates the stability bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("non-finite value in field at t = {0}")]
    NotFinite(f64),
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("{failed} of {n} replicates exceeded the node budget")]
    TooManyBudgetFailures { failed: u64, n: u64 },
    #[error("no level crossing found")]
    NoCrossing,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
