//! Protocols, contexts, and exhaustive system generation.
//!
//! Agents run deterministic protocols: a function from local state to
//! action. All nondeterminism lives in the environment, whose protocol may
//! offer several actions at a state (message loss, fault injection). A
//! context bundles the environment protocol, the initial global states, and
//! the transition function; generating a system enumerates every run
//! consistent with a joint protocol in a context, up to a horizon and a
//! state budget.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::{AgentId, GlobalState, LocalState, Run};
use crate::system::System;
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Action {
    pub label: String,
    pub payload: Value,
}

impl Action {
    pub fn new(label: impl Into<String>, payload: Value) -> Action {
        Action {
            label: label.into(),
            payload,
        }
    }

    /// The distinguished no-op.
    pub fn noop() -> Action {
        Action::new("noop", Value::Unit)
    }

    pub fn is_noop(&self) -> bool {
        self.label == "noop"
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointAction {
    pub env: Action,
    pub agents: Vec<Action>,
}

/// Deterministic agent protocol. `None` marks a state the protocol does not
/// cover; generation surfaces that as a configuration error.
pub trait AgentPolicy: Send + Sync {
    fn act(&self, state: &LocalState) -> Option<Action>;
}

impl<F> AgentPolicy for F
where
    F: Fn(&LocalState) -> Option<Action> + Send + Sync,
{
    fn act(&self, state: &LocalState) -> Option<Action> {
        self(state)
    }
}

/// Environment protocol; the returned order is the enumeration order and
/// must be deterministic for a given state.
pub trait EnvPolicy: Send + Sync {
    fn actions(&self, env: &LocalState) -> Vec<Action>;
}

impl<F> EnvPolicy for F
where
    F: Fn(&LocalState) -> Vec<Action> + Send + Sync,
{
    fn actions(&self, env: &LocalState) -> Vec<Action> {
        self(env)
    }
}

pub trait TransitionFn: Send + Sync {
    fn apply(&self, g: &GlobalState, ja: &JointAction) -> Result<GlobalState>;
}

impl<F> TransitionFn for F
where
    F: Fn(&GlobalState, &JointAction) -> Result<GlobalState> + Send + Sync,
{
    fn apply(&self, g: &GlobalState, ja: &JointAction) -> Result<GlobalState> {
        self(g, ja)
    }
}

/// Tells whether `agent` received at least one message at `time` in `run`.
/// Contexts define what counts as a receive; contexts without communication
/// can answer `false` everywhere.
pub trait ReceiveObserver: Send + Sync {
    fn received(&self, run: &Run, agent: AgentId, time: usize) -> bool;
}

impl<F> ReceiveObserver for F
where
    F: Fn(&Run, AgentId, usize) -> bool + Send + Sync,
{
    fn received(&self, run: &Run, agent: AgentId, time: usize) -> bool {
        self(run, agent, time)
    }
}

pub struct Context {
    pub env: Box<dyn EnvPolicy>,
    pub initial_states: Vec<GlobalState>,
    pub transition: Box<dyn TransitionFn>,
    pub receives: Box<dyn ReceiveObserver>,
}

pub struct JointProtocol {
    pub agents: Vec<Box<dyn AgentPolicy>>,
}

impl JointProtocol {
    pub fn n(&self) -> usize {
        self.agents.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    /// Cap on total global states materialized during generation.
    pub budget: usize,
    /// Worker threads for fanning out over environment branches. Results
    /// are canonicalized, so the worker count never changes the system.
    pub workers: usize,
}

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            budget: DEFAULT_STATE_BUDGET,
            workers: 1,
        }
    }
}

/// All joint actions available at `g`: the agents' protocol choices are
/// forced, so there is exactly one joint action per environment action.
pub fn select_joint_actions(
    ctx: &Context,
    jp: &JointProtocol,
    g: &GlobalState,
) -> Result<Vec<JointAction>> {
    if jp.n() != g.n() {
        return Err(Error::Config(format!(
            "joint protocol covers {} agents but the state has {}",
            jp.n(),
            g.n()
        )));
    }
    let mut agent_actions = Vec::with_capacity(g.n());
    for agent in AgentId::all(g.n()) {
        let local = g.local(agent)?;
        let action = jp.agents[agent.index()]
            .act(local)
            .ok_or_else(|| Error::ProtocolUndefined {
                agent,
                state: local.to_string(),
            })?;
        agent_actions.push(action);
    }
    let env_actions = ctx.env.actions(&g.env);
    if env_actions.is_empty() {
        return Err(Error::Config(format!(
            "environment protocol offers no action at state {}",
            g.env
        )));
    }
    Ok(env_actions
        .into_iter()
        .map(|env| JointAction {
            env,
            agents: agent_actions.clone(),
        })
        .collect())
}

/// Apply one joint action via the context's transition function.
pub fn step(ctx: &Context, g: &GlobalState, ja: &JointAction) -> Result<GlobalState> {
    ctx.transition.apply(g, ja)
}

/// Enumerate every run of `jp` in `ctx` out to `horizon`. Exhaustive over
/// environment nondeterminism; the result is canonical (sorted, deduplicated)
/// regardless of worker count.
pub fn generate_system(
    ctx: &Context,
    jp: &JointProtocol,
    horizon: usize,
    opts: GenOptions,
) -> Result<System> {
    if ctx.initial_states.is_empty() {
        return Err(Error::Config("context has no initial states".into()));
    }
    let n = ctx.initial_states[0].n();
    if ctx.initial_states.iter().any(|g| g.n() != n) {
        return Err(Error::Config(
            "initial states disagree on agent count".into(),
        ));
    }

    let mut frontier: Vec<Vec<GlobalState>> = ctx
        .initial_states
        .iter()
        .map(|g| vec![g.clone()])
        .collect();
    let mut states = frontier.len();

    let extend = |prefix: &Vec<GlobalState>| -> Result<Vec<Vec<GlobalState>>> {
        let last = prefix.last().expect("prefix non-empty");
        let jas = select_joint_actions(ctx, jp, last)?;
        jas.iter()
            .map(|ja| {
                let next = step(ctx, last, ja)?;
                let mut child = prefix.clone();
                child.push(next);
                Ok(child)
            })
            .collect()
    };

    for _ in 0..horizon {
        let expanded: Result<Vec<Vec<Vec<GlobalState>>>> = if opts.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            pool.install(|| frontier.par_iter().map(extend).collect())
        } else {
            frontier.iter().map(extend).collect()
        };
        frontier = expanded?.into_iter().flatten().collect();
        states += frontier.len();
        if states > opts.budget {
            return Err(Error::Budget {
                reached: states,
                budget: opts.budget,
            });
        }
    }

    let runs: Result<Vec<Run>> = frontier.into_iter().map(Run::new).collect();
    System::new(runs?)
}

/// A receive with no within-horizon witness that it could have been delayed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UmdGap {
    pub run: usize,
    pub agent: AgentId,
    pub time: usize,
    pub until: usize,
}

#[derive(Clone, Debug)]
pub struct UmdReport {
    /// Every receive event found in the system.
    pub receives: usize,
    /// (receive, deadline) pairs for which a witness was required.
    pub obligations: usize,
    /// Pairs skipped because another agent's later receive pins the run.
    pub causally_pinned: usize,
    pub gaps: Vec<UmdGap>,
}

impl UmdReport {
    pub fn holds(&self) -> bool {
        self.gaps.is_empty()
    }

    /// True when there was nothing to check: no receives at all.
    pub fn vacuous(&self) -> bool {
        self.receives == 0
    }
}

/// Finite-horizon check that message delays are unbounded in `sys`.
///
/// For a receive by agent i at time m of run r and a deadline m', a witness
/// is a run r' that agrees with r before m, in which i receives nothing in
/// [m, m'], and which no other agent can tell from r through m'. When some
/// other agent receives in (m, m'] of r, its state already depends on the
/// traffic, so no witness can agree with it and the obligation is dropped;
/// what remains is exactly the possibility used to cut knowledge chains.
pub fn check_umd_witnesses(sys: &System, ctx: &Context) -> UmdReport {
    let horizon = sys.horizon();
    let n = sys.n();
    let runs = sys.runs();
    let mut receives = 0;
    let mut obligations = 0;
    let mut pinned = 0;
    let mut gaps = Vec::new();

    for (ri, r) in runs.iter().enumerate() {
        for agent in AgentId::all(n) {
            for m in 1..=horizon {
                if !ctx.receives.received(r, agent, m) {
                    continue;
                }
                receives += 1;
                for until in m..=horizon {
                    let other_receives_later = AgentId::all(n)
                        .filter(|&j| j != agent)
                        .any(|j| (m + 1..=until).any(|t| ctx.receives.received(r, j, t)));
                    if other_receives_later {
                        pinned += 1;
                        continue;
                    }
                    obligations += 1;
                    let witness = runs.iter().any(|r2| {
                        if std::ptr::eq(r, r2) {
                            return false;
                        }
                        let same_prefix =
                            (0..m).all(|t| r.states()[t] == r2.states()[t]);
                        if !same_prefix {
                            return false;
                        }
                        let silent_for_agent =
                            (m..=until).all(|t| !ctx.receives.received(r2, agent, t));
                        if !silent_for_agent {
                            return false;
                        }
                        AgentId::all(n).filter(|&j| j != agent).all(|j| {
                            (0..=until).all(|t| {
                                r.local_state_at(j, t).unwrap()
                                    == r2.local_state_at(j, t).unwrap()
                            })
                        })
                    });
                    if !witness {
                        gaps.push(UmdGap {
                            run: ri,
                            agent,
                            time: m,
                            until,
                        });
                    }
                }
            }
        }
    }

    UmdReport {
        receives,
        obligations,
        causally_pinned: pinned,
        gaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter_context(fanout: Vec<i64>) -> Context {
        // Environment picks an increment from `fanout`; agent 1 accumulates.
        let increments = fanout.clone();
        Context {
            env: Box::new(move |_: &LocalState| {
                increments
                    .iter()
                    .map(|&i| Action::new("inc", Value::Int(i)))
                    .collect()
            }),
            initial_states: vec![GlobalState::new(
                Value::Int(0),
                vec![LocalState(Value::Int(0))],
            )],
            transition: Box::new(|g: &GlobalState, ja: &JointAction| {
                let inc = ja.env.payload.as_int().unwrap_or(0);
                let cur = g.locals[0].0.as_int().unwrap_or(0);
                Ok(GlobalState::new(
                    g.env.0.clone(),
                    vec![LocalState(Value::Int(cur + inc))],
                ))
            }),
            receives: Box::new(|_: &Run, _: AgentId, _: usize| false),
        }
    }

    fn id_protocol() -> JointProtocol {
        JointProtocol {
            agents: vec![Box::new(|_: &LocalState| Some(Action::noop()))],
        }
    }

    #[test]
    fn generation_fans_out_over_env_choices_and_dedups() {
        let ctx = counter_context(vec![1, 2]);
        let sys = generate_system(&ctx, &id_protocol(), 2, GenOptions::default()).unwrap();
        // sums after two rounds: 2,3,3,4 -> deduplication keeps 1+1=2 twice
        // only if the whole run matches; paths (1,2) and (2,1) differ at
        // time 1, so all four runs survive.
        assert_eq!(sys.runs().len(), 4);
        let zero_inc = counter_context(vec![5]);
        let sys1 = generate_system(&zero_inc, &id_protocol(), 3, GenOptions::default()).unwrap();
        assert_eq!(sys1.runs().len(), 1);
    }

    #[test]
    fn worker_count_does_not_change_the_system() {
        let ctx = counter_context(vec![1, 2, 3]);
        let s1 = generate_system(&ctx, &id_protocol(), 3, GenOptions { budget: 100_000, workers: 1 })
            .unwrap();
        let s4 = generate_system(&ctx, &id_protocol(), 3, GenOptions { budget: 100_000, workers: 4 })
            .unwrap();
        assert_eq!(s1.runs(), s4.runs());
    }

    #[test]
    fn budget_overrun_reports_count() {
        let ctx = counter_context(vec![1, 2]);
        let err = generate_system(&ctx, &id_protocol(), 10, GenOptions { budget: 20, workers: 1 })
            .unwrap_err();
        match err {
            Error::Budget { reached, budget } => {
                assert!(reached > budget);
                assert_eq!(budget, 20);
            }
            other => panic!("expected budget error, got {other}"),
        }
    }

    #[test]
    fn undefined_protocol_names_agent_and_state() {
        let ctx = counter_context(vec![1]);
        let jp = JointProtocol {
            agents: vec![Box::new(|s: &LocalState| {
                if s.0.as_int() == Some(0) {
                    Some(Action::noop())
                } else {
                    None
                }
            })],
        };
        let err = generate_system(&ctx, &jp, 2, GenOptions::default()).unwrap_err();
        match err {
            Error::ProtocolUndefined { agent, state } => {
                assert_eq!(agent.get(), 1);
                assert_eq!(state, "1");
            }
            other => panic!("expected protocol error, got {other}"),
        }
    }

    #[test]
    fn replaying_selected_actions_reproduces_every_run() {
        let ctx = counter_context(vec![1, 2]);
        let jp = id_protocol();
        let sys = generate_system(&ctx, &jp, 2, GenOptions::default()).unwrap();
        for run in sys.runs() {
            for t in 0..run.horizon() {
                let here = run.state_at(t).unwrap();
                let next = run.state_at(t + 1).unwrap();
                let reachable = select_joint_actions(&ctx, &jp, here)
                    .unwrap()
                    .iter()
                    .map(|ja| step(&ctx, here, ja).unwrap())
                    .any(|g| &g == next);
                assert!(reachable, "run not consistent at time {t}");
            }
        }
    }
}
