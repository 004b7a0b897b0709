use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),
    #[error("invalid demand profile: {0}")]
    InvalidDemand(String),
    #[error("unknown O-D pair {0}")]
    UnknownPair(String),
    #[error("rate {rate} of pair {pair} is not a multiple of 1/{k_tau} in [0,1]")]
    OffLattice { pair: usize, rate: f64, k_tau: u32 },
    #[error("malformed LP: {0}")]
    MalformedLp(String),
    #[error("simplex stalled after {0} iterations")]
    NumericalInstability(usize),
    #[error("fleet of {fleet} aircraft is below the required {required} distinct slots")]
    InsufficientFleet { fleet: usize, required: usize },
    #[error("pair {0} cannot be served by any service vector")]
    Unserviceable(String),
    #[error("model too large for exact solve: {variables} variables exceeds cap {cap}; use the constructive planner")]
    ModelTooLarge { variables: usize, cap: usize },
    #[error("exact model has no solution: {0}")]
    ExactInfeasible(String),
    #[error("planning failed in cycle {cycle}: {source}")]
    Planning {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("request {0} is unschedulable: no aircraft ever reaches its origin")]
    Unschedulable(usize),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
