use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BxError {
    #[error("agent {agent} out of range 1..={n}")]
    AgentOutOfRange { agent: u32, n: usize },
    #[error("agent {0} lists itself as a wish")]
    SelfWish(u32),
    #[error("too many agents: {0} (at most 128 supported)")]
    TooManyAgents(usize),
    #[error("invalid length function: {0}")]
    InvalidLambda(String),
    #[error("invalid cycle: {0}")]
    InvalidCycle(String),
    #[error("cycle of length {len} exceeds bound k={k}")]
    CycleTooLong { len: usize, k: usize },
    #[error("cycles share agent {0}")]
    NotDisjoint(u32),
    #[error("exchange does not respect the wish lists")]
    NotRespecting,
    #[error("duplicate cycle {0}")]
    DuplicateCycle(String),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("node order does not match the enumerated cycles")]
    NodeOrderMismatch,
    #[error("oracle cap exceeded: {nodes} nodes > cap {cap}")]
    OracleCap { nodes: usize, cap: usize },
    #[error("rule contract violated by {rule}: {reason}")]
    RuleContract { rule: String, reason: String },
    #[error("mechanism undefined: {0}")]
    Undefined(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, BxError>;
