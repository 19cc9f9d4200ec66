use crate::state::AgentId;

/// Unified error type for the crate.
///
/// The CLI maps these onto exit code 2 (configuration / resource problems).
/// Check *failures* (a property that does not hold, an agreement
/// violation) are not errors; they are reported as verdicts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("time {time} out of range: run has states for times 0..={horizon}")]
    TimeOutOfRange { time: usize, horizon: usize },

    #[error("agent {agent} out of range: system has agents 1..={n}")]
    AgentOutOfRange { agent: usize, n: usize },

    #[error("point r{run}/{time} does not belong to this system")]
    ForeignPoint { run: usize, time: usize },

    #[error("protocol for agent {agent} is undefined on reachable local state {state}")]
    ProtocolUndefined { agent: AgentId, state: String },

    #[error("state budget exceeded: {reached} states generated, budget {budget}")]
    Budget { reached: usize, budget: usize },

    #[error("combinatorial budget exceeded: {what} needs {needed}, bound {bound}")]
    Combinatorics {
        what: String,
        needed: usize,
        bound: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
