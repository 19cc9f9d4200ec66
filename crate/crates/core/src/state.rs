//! Global states, runs, and points.
//!
//! A global state has one environment component plus one local state per
//! agent. A run is the sequence of global states a system passes through,
//! indexed by time 0..=horizon. A point is a (run, time) pair; knowledge is
//! always evaluated at points.

use std::fmt;

use crate::error::{Error, Result};
use crate::value::Value;

/// 1-based agent index. The environment is not an agent.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(usize);

impl AgentId {
    /// Panics on 0: ids are 1-based by construction everywhere.
    pub fn new(id: usize) -> AgentId {
        assert!(id >= 1, "agent ids are 1-based");
        AgentId(id)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based position, for indexing into `GlobalState::locals`.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    /// All agents of an n-agent system, in order.
    pub fn all(n: usize) -> impl Iterator<Item = AgentId> {
        (1..=n).map(AgentId)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a single agent (or the environment) can see of the world.
/// Structural equality on the value tree is the indistinguishability test.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LocalState(pub Value);

impl LocalState {
    pub fn value(&self) -> &Value {
        &self.0
    }

    pub fn at(&self, path: &str) -> Option<&Value> {
        self.0.at(path)
    }
}

impl From<Value> for LocalState {
    fn from(v: Value) -> LocalState {
        LocalState(v)
    }
}

impl fmt::Display for LocalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GlobalState {
    pub env: LocalState,
    pub locals: Vec<LocalState>,
}

impl GlobalState {
    pub fn new(env: impl Into<LocalState>, locals: Vec<LocalState>) -> GlobalState {
        GlobalState {
            env: env.into(),
            locals,
        }
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn local(&self, agent: AgentId) -> Result<&LocalState> {
        self.locals.get(agent.index()).ok_or(Error::AgentOutOfRange {
            agent: agent.get(),
            n: self.locals.len(),
        })
    }
}

/// One complete history: global states at times 0..=horizon.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Run {
    states: Vec<GlobalState>,
}

impl Run {
    /// All states must have the same agent arity; the run must be non-empty.
    pub fn new(states: Vec<GlobalState>) -> Result<Run> {
        let first = states
            .first()
            .ok_or_else(|| Error::Model("a run needs at least an initial state".into()))?;
        let n = first.n();
        if states.iter().any(|g| g.n() != n) {
            return Err(Error::Model(format!(
                "all states of a run must have the same agent count ({n})"
            )));
        }
        Ok(Run { states })
    }

    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn n(&self) -> usize {
        self.states[0].n()
    }

    pub fn state_at(&self, time: usize) -> Result<&GlobalState> {
        self.states.get(time).ok_or(Error::TimeOutOfRange {
            time,
            horizon: self.horizon(),
        })
    }

    /// Agent i's view at the given time.
    pub fn local_state_at(&self, agent: AgentId, time: usize) -> Result<&LocalState> {
        self.state_at(time)?.local(agent)
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }
}

/// A (run, time) coordinate within one system. `run` indexes the system's
/// canonical (sorted) run order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Point {
    pub run: usize,
    pub time: usize,
}

impl Point {
    pub fn new(run: usize, time: usize) -> Point {
        Point { run, time }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}/{}", self.run, self.time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(label: &str) -> LocalState {
        LocalState(Value::sym(label))
    }

    #[test]
    fn local_state_at_reports_range_errors() {
        let g = GlobalState::new(Value::Unit, vec![st("a"), st("b")]);
        let run = Run::new(vec![g.clone(), g]).unwrap();
        assert_eq!(run.local_state_at(AgentId::new(2), 1).unwrap(), &st("b"));
        assert!(matches!(
            run.local_state_at(AgentId::new(2), 5),
            Err(Error::TimeOutOfRange { time: 5, horizon: 1 })
        ));
        assert!(matches!(
            run.local_state_at(AgentId::new(3), 0),
            Err(Error::AgentOutOfRange { agent: 3, n: 2 })
        ));
    }

    #[test]
    fn run_rejects_mixed_arity() {
        let g2 = GlobalState::new(Value::Unit, vec![st("a"), st("b")]);
        let g1 = GlobalState::new(Value::Unit, vec![st("a")]);
        assert!(Run::new(vec![g2, g1]).is_err());
    }
}
