use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no assignment satisfies every rate floor")]
    Infeasible,
    #[error("latency undefined: user {user} function {position} is not placed")]
    UndefinedLatency { user: usize, position: usize },
    #[error("optimality gap undefined for a zero reference objective")]
    UndefinedGap,
}
