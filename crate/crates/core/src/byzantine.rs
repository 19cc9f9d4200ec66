//! Simultaneous agreement under crash, omission, and byzantine faults.
//!
//! Agents run a full-information relay protocol for t+1 synchronous rounds:
//! round 1 broadcasts the initial preference, later rounds forward every
//! newly heard claim, and at the end of round t+1 each live agent decides.
//! The environment plays the adversary. Its nondeterminism at each round is
//! the set of fault directives consistent with the failure model, so
//! generating the system enumerates every adversary schedule crossed with
//! every initial preference vector. Checkers then sweep the runs for
//! agreement, validity, and simultaneity, and the lower-bound experiment
//! measures when "someone preferred attack" becomes common knowledge among
//! the nonfaulty.
//!
//! Fault semantics, all applied by the transition:
//! - crash(round, to): delivers that round's message only to `to`, then the
//!   agent is silent and its local state is frozen.
//! - omission(skips): drops chosen outgoing messages per round; receiving
//!   and deciding are unaffected. The first nonempty skip marks the agent
//!   faulty.
//! - byzantine(msgs): corrupted from round 1; every round it sends each
//!   recipient an arbitrary tree from the valid claim language. Its own
//!   state is frozen and it never decides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::claims::{ClaimPath, ClaimTree, Pref};
use crate::engine::{generate_system, Action, Context, GenOptions, JointAction, JointProtocol};
use crate::epistemics::{knows, nonfaulty_common_knowledge};
use crate::error::{Error, Result};
use crate::event::Event;
use crate::state::{AgentId, GlobalState, LocalState, Point, Run};
use crate::system::System;
use crate::value::Value;

/// Max claim paths per forged message; keeps the byzantine language finite
/// at desk scale (the path count grows factorially with n and round).
pub const DEFAULT_CLAIM_BOUND: usize = 3;

const SCHEDULE_CAP: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FailureKind {
    Crash,
    Omission,
    Byzantine,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureKind::Crash => write!(f, "crash"),
            FailureKind::Omission => write!(f, "omission"),
            FailureKind::Byzantine => write!(f, "byzantine"),
        }
    }
}

impl FromStr for FailureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<FailureKind> {
        match s {
            "crash" => Ok(FailureKind::Crash),
            "omission" => Ok(FailureKind::Omission),
            "byzantine" => Ok(FailureKind::Byzantine),
            other => Err(Error::Config(format!(
                "unknown failure kind '{other}' (expected crash, omission, or byzantine)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FailureModel {
    pub kind: FailureKind,
    pub n: usize,
    pub t: usize,
}

impl FailureModel {
    pub fn new(kind: FailureKind, n: usize, t: usize) -> Result<FailureModel> {
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 agents, got {n}")));
        }
        if t >= n {
            return Err(Error::Config(format!(
                "fault budget t={t} must be smaller than n={n}"
            )));
        }
        Ok(FailureModel { kind, n, t })
    }

    /// Rounds until decision: t+1.
    pub fn rounds(&self) -> usize {
        self.t + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionRule {
    /// Attack iff any claim chain reports an initial attack preference.
    AnyAttack,
    /// Ignore the evidence; the trivial protocol validity rules out.
    AlwaysRetreat,
}

impl DecisionRule {
    fn decide(&self, tree: &ClaimTree) -> Pref {
        match self {
            DecisionRule::AnyAttack => {
                if tree.any_value(Pref::Attack) {
                    Pref::Attack
                } else {
                    Pref::Retreat
                }
            }
            DecisionRule::AlwaysRetreat => Pref::Retreat,
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionRule::AnyAttack => write!(f, "any-attack"),
            DecisionRule::AlwaysRetreat => write!(f, "always-retreat"),
        }
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<DecisionRule> {
        match s {
            "any-attack" => Ok(DecisionRule::AnyAttack),
            "always-retreat" => Ok(DecisionRule::AlwaysRetreat),
            other => Err(Error::Config(format!(
                "unknown decision rule '{other}' (expected any-attack or always-retreat)"
            ))),
        }
    }
}

/// One faulty agent's resolved behavior across a whole run.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FaultBehavior {
    Crash {
        round: usize,
        deliver_to: BTreeSet<AgentId>,
    },
    Omission {
        /// Recipients skipped per round; not all empty.
        omit: Vec<BTreeSet<AgentId>>,
    },
    Byzantine {
        /// Forged message per round per recipient.
        msgs: Vec<BTreeMap<AgentId, ClaimTree>>,
    },
}

/// Every environment choice of one run, resolved: which agents are faulty
/// and what each does round by round.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct AdversarySchedule {
    pub faults: BTreeMap<AgentId, FaultBehavior>,
}

impl AdversarySchedule {
    pub fn fault_free() -> AdversarySchedule {
        AdversarySchedule::default()
    }

    pub fn is_fault_free(&self) -> bool {
        self.faults.is_empty()
    }

    /// Stable human-readable identity, used as a report key.
    pub fn label(&self) -> String {
        if self.faults.is_empty() {
            return "fault-free".to_string();
        }
        let ids = |set: &BTreeSet<AgentId>| {
            set.iter()
                .map(|a| a.get().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        self.faults
            .iter()
            .map(|(z, b)| match b {
                FaultBehavior::Crash { round, deliver_to } => {
                    format!("crash(a{z}@r{round},to={{{}}})", ids(deliver_to))
                }
                FaultBehavior::Omission { omit } => {
                    let per_round = omit
                        .iter()
                        .map(|s| format!("{{{}}}", ids(s)))
                        .collect::<Vec<_>>()
                        .join(",");
                    format!("omit(a{z},[{per_round}])")
                }
                FaultBehavior::Byzantine { msgs } => {
                    let per_round = msgs
                        .iter()
                        .enumerate()
                        .map(|(i, m)| {
                            let per_rcpt = m
                                .iter()
                                .map(|(k, tree)| format!("{k}:{}", tree.to_value()))
                                .collect::<Vec<_>>()
                                .join(" ");
                            format!("r{}[{per_rcpt}]", i + 1)
                        })
                        .collect::<Vec<_>>()
                        .join(",");
                    format!("byz(a{z},{per_round})")
                }
            })
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn to_value(&self) -> Value {
        let agent_set = |s: &BTreeSet<AgentId>| Value::seq(s.iter().map(|a| Value::from(a.get())));
        Value::rec([(
            "faults",
            Value::Rec(
                self.faults
                    .iter()
                    .map(|(z, b)| {
                        let body = match b {
                            FaultBehavior::Crash { round, deliver_to } => Value::rec([
                                ("kind", Value::sym("crash")),
                                ("round", Value::from(*round)),
                                ("to", agent_set(deliver_to)),
                            ]),
                            FaultBehavior::Omission { omit } => Value::rec([
                                ("kind", Value::sym("omission")),
                                ("omit", Value::seq(omit.iter().map(agent_set))),
                            ]),
                            FaultBehavior::Byzantine { msgs } => Value::rec([
                                ("kind", Value::sym("byzantine")),
                                (
                                    "rounds",
                                    Value::seq(msgs.iter().map(|m| {
                                        Value::Rec(
                                            m.iter()
                                                .map(|(k, t)| (k.get().to_string(), t.to_value()))
                                                .collect(),
                                        )
                                    })),
                                ),
                            ]),
                        };
                        (z.get().to_string(), body)
                    })
                    .collect(),
            ),
        )])
    }

    pub fn from_value(v: &Value) -> Result<AdversarySchedule> {
        let bad = |what: &str| Error::Config(format!("bad schedule encoding: {what}"));
        let parse_set = |v: &Value| -> Result<BTreeSet<AgentId>> {
            v.as_seq()
                .ok_or_else(|| bad("agent set"))?
                .iter()
                .map(|x| {
                    x.as_int()
                        .filter(|&i| i >= 1)
                        .map(|i| AgentId::new(i as usize))
                        .ok_or_else(|| bad("agent id"))
                })
                .collect()
        };
        let faults_rec = v
            .at("faults")
            .and_then(Value::as_rec)
            .ok_or_else(|| bad("missing faults record"))?;
        let mut faults = BTreeMap::new();
        for (key, body) in faults_rec {
            let z = key
                .parse::<usize>()
                .ok()
                .filter(|&i| i >= 1)
                .map(AgentId::new)
                .ok_or_else(|| bad("agent key"))?;
            let kind = body.at("kind").and_then(Value::as_sym).unwrap_or("");
            let behavior = match kind {
                "crash" => FaultBehavior::Crash {
                    round: body
                        .at("round")
                        .and_then(Value::as_int)
                        .filter(|&r| r >= 1)
                        .ok_or_else(|| bad("crash round"))? as usize,
                    deliver_to: parse_set(body.at("to").ok_or_else(|| bad("crash to"))?)?,
                },
                "omission" => FaultBehavior::Omission {
                    omit: body
                        .at("omit")
                        .and_then(Value::as_seq)
                        .ok_or_else(|| bad("omit rounds"))?
                        .iter()
                        .map(parse_set)
                        .collect::<Result<_>>()?,
                },
                "byzantine" => FaultBehavior::Byzantine {
                    msgs: body
                        .at("rounds")
                        .and_then(Value::as_seq)
                        .ok_or_else(|| bad("byzantine rounds"))?
                        .iter()
                        .map(|m| {
                            m.as_rec()
                                .ok_or_else(|| bad("byzantine message map"))?
                                .iter()
                                .map(|(k, t)| {
                                    let rcpt = k
                                        .parse::<usize>()
                                        .ok()
                                        .filter(|&i| i >= 1)
                                        .map(AgentId::new)
                                        .ok_or_else(|| bad("recipient key"))?;
                                    Ok((rcpt, ClaimTree::from_value(t)?))
                                })
                                .collect::<Result<BTreeMap<_, _>>>()
                        })
                        .collect::<Result<_>>()?,
                },
                other => return Err(bad(&format!("fault kind '{other}'"))),
            };
            faults.insert(z, behavior);
        }
        Ok(AdversarySchedule { faults })
    }
}

// ---- state layout ----------------------------------------------------------
//
// env:   {round, prefs, status, log}; log holds one {round, faults} entry per
//        completed round, which makes every schedule recoverable from the
//        final state and keeps runs of distinct schedules distinct.
// agent: {round, tree} plus "decided" once set. Round stamps keep points of
//        different times distinguishable (synchronous rounds).

fn sym_of_pref(p: Pref) -> Value {
    Value::sym(p.to_string())
}

fn initial_global(prefs: &[Pref]) -> GlobalState {
    let env = Value::rec([
        ("log", Value::seq([])),
        ("prefs", Value::seq(prefs.iter().map(|&p| sym_of_pref(p)))),
        ("round", Value::Int(0)),
        (
            "status",
            Value::seq(prefs.iter().map(|_| Value::sym("ok"))),
        ),
    ]);
    let locals = prefs
        .iter()
        .map(|&p| {
            let mut tree = ClaimTree::new();
            tree.insert(ClaimPath::root(), p);
            LocalState(Value::rec([
                ("round", Value::Int(0)),
                ("tree", tree.to_value()),
            ]))
        })
        .collect();
    GlobalState::new(env, locals)
}

fn all_pref_vectors(n: usize) -> Vec<Vec<Pref>> {
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0..1u32 << n {
        out.push(
            (0..n)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        Pref::Attack
                    } else {
                        Pref::Retreat
                    }
                })
                .collect(),
        );
    }
    out
}

fn env_round(env: &LocalState) -> Result<usize> {
    env.at("round")
        .and_then(Value::as_int)
        .map(|r| r as usize)
        .ok_or_else(|| Error::Internal(format!("env state lacks round: {env}")))
}

fn env_statuses(env: &LocalState) -> Result<Vec<String>> {
    env.at("status")
        .and_then(Value::as_seq)
        .map(|s| {
            s.iter()
                .map(|v| v.as_sym().unwrap_or("?").to_string())
                .collect()
        })
        .ok_or_else(|| Error::Internal(format!("env state lacks status: {env}")))
}

fn env_prefs(env: &LocalState) -> Result<Vec<Pref>> {
    env.at("prefs")
        .and_then(Value::as_seq)
        .ok_or_else(|| Error::Internal(format!("env state lacks prefs: {env}")))?
        .iter()
        .map(|v| {
            v.as_sym()
                .ok_or_else(|| Error::Internal("pref not a symbol".into()))?
                .parse()
        })
        .collect()
}

fn others(n: usize, z: AgentId) -> Vec<AgentId> {
    AgentId::all(n).filter(|&a| a != z).collect()
}

fn subsets(pool: &[AgentId]) -> Vec<BTreeSet<AgentId>> {
    (0..1u32 << pool.len())
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &a)| a)
                .collect()
        })
        .collect()
}

// ---- the byzantine claim language ------------------------------------------

/// Repeat-free agent sequences of `len` drawn from everyone but `z`: the
/// paths a round-(len+1) message from `z` may mention.
fn forged_paths(n: usize, z: AgentId, len: usize) -> Vec<ClaimPath> {
    fn go(pool: &[AgentId], len: usize, prefix: &mut Vec<AgentId>, out: &mut Vec<ClaimPath>) {
        if prefix.len() == len {
            out.push(ClaimPath::new(prefix.clone()).expect("distinct by construction"));
            return;
        }
        for &a in pool {
            if !prefix.contains(&a) {
                prefix.push(a);
                go(pool, len, prefix, out);
                prefix.pop();
            }
        }
    }
    let pool = others(n, z);
    let mut out = Vec::new();
    go(&pool, len, &mut Vec::new(), &mut out);
    out
}

/// Every tree over `paths`: each path absent, or claimed attack, or retreat.
fn forged_trees(paths: &[ClaimPath]) -> Vec<ClaimTree> {
    let mut out = Vec::new();
    let total = 3usize.pow(paths.len() as u32);
    for mut code in 0..total {
        let mut tree = ClaimTree::new();
        for p in paths {
            match code % 3 {
                0 => {}
                1 => tree.insert(p.clone(), Pref::Attack),
                _ => tree.insert(p.clone(), Pref::Retreat),
            }
            code /= 3;
        }
        out.push(tree);
    }
    out
}

/// All per-recipient forged-message assignments for `z` at round `r`.
fn byz_assignments(n: usize, z: AgentId, r: usize) -> Vec<BTreeMap<AgentId, ClaimTree>> {
    let trees = forged_trees(&forged_paths(n, z, r - 1));
    let mut out: Vec<BTreeMap<AgentId, ClaimTree>> = vec![BTreeMap::new()];
    for k in others(n, z) {
        let mut next = Vec::with_capacity(out.len() * trees.len());
        for partial in &out {
            for t in &trees {
                let mut m = partial.clone();
                m.insert(k, t.clone());
                next.push(m);
            }
        }
        out = next;
    }
    out
}

fn check_claim_bound(fm: &FailureModel, rounds: usize, claim_bound: usize) -> Result<()> {
    if fm.kind != FailureKind::Byzantine {
        return Ok(());
    }
    for r in 1..=rounds {
        // paths per message at round r: falling factorial over the n-1
        // agents a traitor may mention
        let p: usize = (0..r - 1).map(|i| fm.n - 1 - i).product();
        if p > claim_bound {
            return Err(Error::Combinatorics {
                what: format!("forged claim paths per message at round {r}"),
                needed: p,
                bound: claim_bound,
            });
        }
    }
    Ok(())
}

// ---- fault directives ------------------------------------------------------
//
// The environment action at round r is a record {faults: [..]} listing what
// each currently-or-newly faulty agent does this round. The same encoding
// is appended to the env log, so schedules can be read back from runs.

fn crash_record(z: AgentId, to: &BTreeSet<AgentId>) -> Value {
    Value::rec([
        ("agent", Value::from(z.get())),
        ("kind", Value::sym("crash")),
        ("to", Value::seq(to.iter().map(|a| Value::from(a.get())))),
    ])
}

fn omit_record(z: AgentId, skip: &BTreeSet<AgentId>) -> Value {
    Value::rec([
        ("agent", Value::from(z.get())),
        ("kind", Value::sym("omit")),
        (
            "skip",
            Value::seq(skip.iter().map(|a| Value::from(a.get()))),
        ),
    ])
}

fn byz_record(z: AgentId, msgs: &BTreeMap<AgentId, ClaimTree>) -> Value {
    Value::rec([
        ("agent", Value::from(z.get())),
        ("kind", Value::sym("byz")),
        (
            "msgs",
            Value::Rec(
                msgs.iter()
                    .map(|(k, t)| (k.get().to_string(), t.to_value()))
                    .collect(),
            ),
        ),
    ])
}

fn directive_action(faults: Vec<Value>) -> Action {
    Action::new("adversary", Value::rec([("faults", Value::seq(faults))]))
}

/// Environment branching at one round: the cross product of each agent's
/// allowed fault options, filtered by the fault budget t.
fn adversary_actions(fm: &FailureModel, rounds: usize, env: &LocalState) -> Vec<Action> {
    let r = match env_round(env) {
        Ok(done) => done + 1,
        Err(_) => return Vec::new(),
    };
    if r > rounds {
        return vec![directive_action(Vec::new())];
    }
    let statuses = match env_statuses(env) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };

    // None = honest this round; Some = a fault record.
    let mut options: Vec<Vec<Option<Value>>> = Vec::with_capacity(fm.n);
    for z in AgentId::all(fm.n) {
        let opts = match statuses[z.index()].as_str() {
            "crashed" => vec![None],
            "omission" => subsets(&others(fm.n, z))
                .iter()
                .map(|s| Some(omit_record(z, s)))
                .collect(),
            "byzantine" => byz_assignments(fm.n, z, r)
                .iter()
                .map(|m| Some(byz_record(z, m)))
                .collect(),
            _ => {
                let mut v = vec![None];
                match fm.kind {
                    FailureKind::Crash => {
                        v.extend(
                            subsets(&others(fm.n, z))
                                .iter()
                                .map(|s| Some(crash_record(z, s))),
                        );
                    }
                    FailureKind::Omission => {
                        v.extend(
                            subsets(&others(fm.n, z))
                                .iter()
                                .filter(|s| !s.is_empty())
                                .map(|s| Some(omit_record(z, s))),
                        );
                    }
                    FailureKind::Byzantine => {
                        // corruption is pinned to round 1 so each traitor
                        // maps to exactly one schedule
                        if r == 1 {
                            v.extend(
                                byz_assignments(fm.n, z, r)
                                    .iter()
                                    .map(|m| Some(byz_record(z, m))),
                            );
                        }
                    }
                }
                v
            }
        };
        options.push(opts);
    }

    let mut combos: Vec<Vec<Option<Value>>> = vec![Vec::new()];
    for agent_opts in &options {
        let mut next = Vec::with_capacity(combos.len() * agent_opts.len());
        for partial in &combos {
            for opt in agent_opts {
                let mut c = partial.clone();
                c.push(opt.clone());
                next.push(c);
            }
        }
        combos = next;
    }

    combos
        .into_iter()
        .filter(|combo| {
            let faulty_after = statuses
                .iter()
                .zip(combo)
                .filter(|(st, opt)| st.as_str() != "ok" || opt.is_some())
                .count();
            faulty_after <= fm.t
        })
        .map(|combo| directive_action(combo.into_iter().flatten().collect()))
        .collect()
}

// ---- protocol, transition, context -----------------------------------------

/// The full-information relay protocol: every round, send every claim of
/// the newest depth to everyone. Decisions are applied by the transition at
/// the end of round t+1.
pub fn eig_protocol(n: usize, t: usize) -> Result<JointProtocol> {
    FailureModel::new(FailureKind::Crash, n, t)?;
    let policy = |s: &LocalState| -> Option<Action> {
        let round = s.at("round")?.as_int()?;
        let tree = ClaimTree::from_value(s.at("tree")?).ok()?;
        let mut msg = ClaimTree::new();
        for (p, v) in tree.at_depth(round as usize) {
            msg.insert(p.clone(), v);
        }
        Some(Action::new("send", msg.to_value()))
    };
    Ok(JointProtocol {
        agents: (0..n).map(|_| Box::new(policy) as Box<_>).collect(),
    })
}

struct RoundDirective {
    crash_to: BTreeMap<AgentId, BTreeSet<AgentId>>,
    omit_skip: BTreeMap<AgentId, BTreeSet<AgentId>>,
    byz_msgs: BTreeMap<AgentId, BTreeMap<AgentId, ClaimTree>>,
}

fn parse_directive(payload: &Value) -> Result<RoundDirective> {
    let bad = |what: &str| Error::Internal(format!("malformed fault directive: {what}"));
    let mut d = RoundDirective {
        crash_to: BTreeMap::new(),
        omit_skip: BTreeMap::new(),
        byz_msgs: BTreeMap::new(),
    };
    let faults = payload
        .at("faults")
        .and_then(Value::as_seq)
        .ok_or_else(|| bad("no faults list"))?;
    for f in faults {
        let z = f
            .at("agent")
            .and_then(Value::as_int)
            .map(|i| AgentId::new(i as usize))
            .ok_or_else(|| bad("agent"))?;
        let set_field = |name: &str| -> Result<BTreeSet<AgentId>> {
            f.at(name)
                .and_then(Value::as_seq)
                .ok_or_else(|| bad(name))?
                .iter()
                .map(|v| {
                    v.as_int()
                        .map(|i| AgentId::new(i as usize))
                        .ok_or_else(|| bad("agent id"))
                })
                .collect()
        };
        match f.at("kind").and_then(Value::as_sym) {
            Some("crash") => {
                d.crash_to.insert(z, set_field("to")?);
            }
            Some("omit") => {
                d.omit_skip.insert(z, set_field("skip")?);
            }
            Some("byz") => {
                let msgs = f
                    .at("msgs")
                    .and_then(Value::as_rec)
                    .ok_or_else(|| bad("msgs"))?
                    .iter()
                    .map(|(k, t)| {
                        let rcpt = k
                            .parse::<usize>()
                            .map_err(|_| bad("recipient"))
                            .map(AgentId::new)?;
                        Ok((rcpt, ClaimTree::from_value(t)?))
                    })
                    .collect::<Result<_>>()?;
                d.byz_msgs.insert(z, msgs);
            }
            _ => return Err(bad("kind")),
        }
    }
    Ok(d)
}

fn agreement_transition(
    fm: FailureModel,
    rule: DecisionRule,
    g: &GlobalState,
    ja: &JointAction,
) -> Result<GlobalState> {
    let n = fm.n;
    let rounds = fm.rounds();
    let done = env_round(&g.env)?;
    let r = done + 1;
    let mut statuses = env_statuses(&g.env)?;
    let directive = parse_directive(&ja.env.payload)?;

    let log_entry = Value::rec([
        (
            "faults",
            ja.env
                .payload
                .at("faults")
                .cloned()
                .unwrap_or_else(|| Value::seq([])),
        ),
        ("round", Value::from(r)),
    ]);

    let mut locals = g.locals.clone();

    if r > rounds {
        // idle tail: live agents only tick their round stamp
        for z in AgentId::all(n) {
            if matches!(statuses[z.index()].as_str(), "ok" | "omission") {
                locals[z.index()] =
                    LocalState(locals[z.index()].value().clone().with("round", Value::from(r)));
            }
        }
    } else {
        // deliveries[j] = messages reaching agent j this round, by sender
        let mut deliveries: Vec<Vec<(AgentId, ClaimTree)>> = vec![Vec::new(); n];
        let mut frozen_now: BTreeSet<AgentId> = BTreeSet::new();

        for z in AgentId::all(n) {
            match statuses[z.index()].as_str() {
                "crashed" => continue,
                "byzantine" => {
                    let msgs = directive.byz_msgs.get(&z).ok_or_else(|| {
                        Error::Internal(format!("byzantine {z} has no directive at round {r}"))
                    })?;
                    for (&k, tree) in msgs {
                        deliveries[k.index()].push((z, tree.clone()));
                    }
                }
                _ => {
                    if let Some(msgs) = directive.byz_msgs.get(&z) {
                        // corrupted this round (round 1 only)
                        statuses[z.index()] = "byzantine".into();
                        frozen_now.insert(z);
                        for (&k, tree) in msgs {
                            deliveries[k.index()].push((z, tree.clone()));
                        }
                        continue;
                    }
                    let msg = ClaimTree::from_value(&ja.agents[z.index()].payload)?;
                    if let Some(to) = directive.crash_to.get(&z) {
                        statuses[z.index()] = "crashed".into();
                        frozen_now.insert(z);
                        for &k in to {
                            deliveries[k.index()].push((z, msg.clone()));
                        }
                    } else {
                        let skip = directive.omit_skip.get(&z);
                        if let Some(s) = skip {
                            if !s.is_empty() {
                                statuses[z.index()] = "omission".into();
                            }
                        }
                        for k in AgentId::all(n) {
                            if skip.map_or(false, |s| s.contains(&k)) {
                                continue;
                            }
                            deliveries[k.index()].push((z, msg.clone()));
                        }
                    }
                }
            }
        }

        for j in AgentId::all(n) {
            let alive = matches!(statuses[j.index()].as_str(), "ok" | "omission")
                && !frozen_now.contains(&j);
            if !alive {
                continue;
            }
            let local = &locals[j.index()];
            let mut tree = ClaimTree::from_value(local.at("tree").ok_or_else(|| {
                Error::Internal(format!("agent {j} state lacks tree: {local}"))
            })?)?;
            for (sender, msg) in &deliveries[j.index()] {
                tree.merge_message(msg, *sender);
            }
            let mut next = Value::rec([
                ("round", Value::from(r)),
                ("tree", tree.to_value()),
            ]);
            if r == rounds {
                next = next.with("decided", sym_of_pref(rule.decide(&tree)));
            }
            locals[j.index()] = LocalState(next);
        }
    }

    let env = g
        .env
        .value()
        .clone()
        .with("round", Value::from(r))
        .with(
            "status",
            Value::seq(statuses.iter().map(|s| Value::sym(s.clone()))),
        )
        .with(
            "log",
            g.env
                .at("log")
                .cloned()
                .unwrap_or_else(|| Value::seq([]))
                .push(log_entry),
        );
    Ok(GlobalState::new(env, locals))
}

/// Context whose environment enumerates every adversary directive allowed
/// by `fm` and whose initial states cover all 2^n preference vectors.
pub fn eig_context(
    fm: &FailureModel,
    rule: DecisionRule,
    claim_bound: usize,
) -> Result<Context> {
    check_claim_bound(fm, fm.rounds(), claim_bound)?;
    let fm = *fm;
    let rounds = fm.rounds();
    Ok(Context {
        env: Box::new(move |env: &LocalState| adversary_actions(&fm, rounds, env)),
        initial_states: all_pref_vectors(fm.n)
            .iter()
            .map(|p| initial_global(p))
            .collect(),
        transition: Box::new(move |g: &GlobalState, ja: &JointAction| {
            agreement_transition(fm, rule, g, ja)
        }),
        receives: Box::new(|run: &Run, agent: AgentId, time: usize| {
            if time == 0 {
                return false;
            }
            let size_at = |t: usize| {
                run.local_state_at(agent, t)
                    .ok()
                    .and_then(|s| s.at("tree"))
                    .and_then(Value::as_rec)
                    .map(|r| r.len())
                    .unwrap_or(0)
            };
            size_at(time) > size_at(time - 1)
        }),
    })
}

/// The full agreement system: every initial preference vector crossed with
/// every adversary schedule of `fm`, out to `horizon` ≥ t+1 rounds.
pub fn run_agreement(
    fm: &FailureModel,
    rule: DecisionRule,
    horizon: usize,
    claim_bound: usize,
    opts: GenOptions,
) -> Result<System> {
    if horizon < fm.rounds() {
        return Err(Error::Config(format!(
            "horizon {horizon} is shorter than the decision round {}",
            fm.rounds()
        )));
    }
    let ctx = eig_context(fm, rule, claim_bound)?;
    let jp = eig_protocol(fm.n, fm.t)?;
    generate_system(&ctx, &jp, horizon, opts)
}

// ---- schedule enumeration and extraction -----------------------------------

fn behavior_space(fm: &FailureModel, rounds: usize, z: AgentId) -> Vec<FaultBehavior> {
    match fm.kind {
        FailureKind::Crash => {
            let mut out = Vec::new();
            for round in 1..=rounds {
                for to in subsets(&others(fm.n, z)) {
                    out.push(FaultBehavior::Crash {
                        round,
                        deliver_to: to,
                    });
                }
            }
            out
        }
        FailureKind::Omission => {
            let per_round = subsets(&others(fm.n, z));
            let mut vectors: Vec<Vec<BTreeSet<AgentId>>> = vec![Vec::new()];
            for _ in 0..rounds {
                let mut next = Vec::with_capacity(vectors.len() * per_round.len());
                for v in &vectors {
                    for s in &per_round {
                        let mut w = v.clone();
                        w.push(s.clone());
                        next.push(w);
                    }
                }
                vectors = next;
            }
            vectors
                .into_iter()
                .filter(|v| v.iter().any(|s| !s.is_empty()))
                .map(|omit| FaultBehavior::Omission { omit })
                .collect()
        }
        FailureKind::Byzantine => {
            let mut vectors: Vec<Vec<BTreeMap<AgentId, ClaimTree>>> = vec![Vec::new()];
            for r in 1..=rounds {
                let per_round = byz_assignments(fm.n, z, r);
                let mut next = Vec::with_capacity(vectors.len() * per_round.len());
                for v in &vectors {
                    for m in &per_round {
                        let mut w = v.clone();
                        w.push(m.clone());
                        next.push(w);
                    }
                }
                vectors = next;
            }
            vectors
                .into_iter()
                .map(|msgs| FaultBehavior::Byzantine { msgs })
                .collect()
        }
    }
}

fn schedule_count(fm: &FailureModel, rounds: usize) -> u128 {
    let per_agent: u128 = match fm.kind {
        FailureKind::Crash => (rounds as u128) * (1u128 << (fm.n - 1)),
        FailureKind::Omission => {
            (1u128 << (fm.n - 1)).pow(rounds as u32).saturating_sub(1)
        }
        FailureKind::Byzantine => (1..=rounds)
            .map(|r| {
                let paths: u32 = ((0..r - 1).map(|i| fm.n - 1 - i).product::<usize>()) as u32;
                3u128.pow(paths).pow((fm.n - 1) as u32)
            })
            .product(),
    };
    // sum over faulty sets of size 0..=t
    let mut total = 0u128;
    let mut choose = 1u128; // C(n, k)
    for k in 0..=fm.t as u128 {
        if k > 0 {
            choose = choose * (fm.n as u128 - k + 1) / k;
        }
        total = total.saturating_add(choose.saturating_mul(per_agent.saturating_pow(k as u32)));
    }
    total
}

/// Every resolved adversary schedule of `fm` over `rounds` rounds. The
/// count is checked against a hard cap first so an oversized request fails
/// with the number instead of thrashing.
pub fn enumerate_schedules(
    fm: &FailureModel,
    rounds: usize,
    claim_bound: usize,
) -> Result<Vec<AdversarySchedule>> {
    if rounds < 1 {
        return Err(Error::Config("schedule enumeration needs rounds ≥ 1".into()));
    }
    check_claim_bound(fm, rounds, claim_bound)?;
    let count = schedule_count(fm, rounds);
    if count > SCHEDULE_CAP {
        return Err(Error::Combinatorics {
            what: format!("{} adversary schedules", fm.kind),
            needed: count.min(usize::MAX as u128) as usize,
            bound: SCHEDULE_CAP as usize,
        });
    }

    let agents: Vec<AgentId> = AgentId::all(fm.n).collect();
    let mut out = vec![AdversarySchedule::fault_free()];
    // choose the faulty set, then assign each member a behavior
    for size in 1..=fm.t {
        let mut sets: Vec<Vec<AgentId>> = Vec::new();
        fn choose_sets(
            pool: &[AgentId],
            size: usize,
            start: usize,
            cur: &mut Vec<AgentId>,
            out: &mut Vec<Vec<AgentId>>,
        ) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            for i in start..pool.len() {
                cur.push(pool[i]);
                choose_sets(pool, size, i + 1, cur, out);
                cur.pop();
            }
        }
        choose_sets(&agents, size, 0, &mut Vec::new(), &mut sets);
        for set in sets {
            let mut assigned: Vec<BTreeMap<AgentId, FaultBehavior>> = vec![BTreeMap::new()];
            for &z in &set {
                let space = behavior_space(fm, rounds, z);
                let mut next = Vec::with_capacity(assigned.len() * space.len());
                for partial in &assigned {
                    for b in &space {
                        let mut m = partial.clone();
                        m.insert(z, b.clone());
                        next.push(m);
                    }
                }
                assigned = next;
            }
            out.extend(
                assigned
                    .into_iter()
                    .map(|faults| AdversarySchedule { faults }),
            );
        }
    }
    Ok(out)
}

/// Read back the initial preferences and the adversary schedule from a
/// completed run's environment log.
pub fn schedule_of_run(run: &Run, rounds: usize) -> Result<(Vec<Pref>, AdversarySchedule)> {
    let last = run.states().last().expect("runs are non-empty");
    let prefs = env_prefs(&last.env)?;
    let log = last
        .env
        .at("log")
        .and_then(Value::as_seq)
        .ok_or_else(|| Error::Internal("env state lacks log".into()))?;

    let mut crash: BTreeMap<AgentId, (usize, BTreeSet<AgentId>)> = BTreeMap::new();
    let mut omit: BTreeMap<AgentId, BTreeMap<usize, BTreeSet<AgentId>>> = BTreeMap::new();
    let mut byz: BTreeMap<AgentId, BTreeMap<usize, BTreeMap<AgentId, ClaimTree>>> = BTreeMap::new();

    for entry in log {
        let r = entry
            .at("round")
            .and_then(Value::as_int)
            .ok_or_else(|| Error::Internal("log entry lacks round".into()))? as usize;
        if r > rounds {
            continue;
        }
        let d = parse_directive(entry)?;
        for (z, to) in d.crash_to {
            crash.insert(z, (r, to));
        }
        for (z, skip) in d.omit_skip {
            omit.entry(z).or_default().insert(r, skip);
        }
        for (z, msgs) in d.byz_msgs {
            byz.entry(z).or_default().insert(r, msgs);
        }
    }

    let mut faults = BTreeMap::new();
    for (z, (round, deliver_to)) in crash {
        faults.insert(z, FaultBehavior::Crash { round, deliver_to });
    }
    for (z, per_round) in omit {
        let omit_vec = (1..=rounds)
            .map(|r| per_round.get(&r).cloned().unwrap_or_default())
            .collect();
        faults.insert(z, FaultBehavior::Omission { omit: omit_vec });
    }
    for (z, per_round) in byz {
        let msgs = (1..=rounds)
            .map(|r| {
                per_round.get(&r).cloned().ok_or_else(|| {
                    Error::Internal(format!("byzantine {z} missing directive at round {r}"))
                })
            })
            .collect::<Result<_>>()?;
        faults.insert(z, FaultBehavior::Byzantine { msgs });
    }
    Ok((prefs, AdversarySchedule { faults }))
}

/// Index a system's runs by schedule label, restricted to one preference
/// vector.
pub fn runs_by_schedule(
    sys: &System,
    rounds: usize,
    prefs: &[Pref],
) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for (ri, run) in sys.runs().iter().enumerate() {
        let (p, s) = schedule_of_run(run, rounds)?;
        if p == prefs {
            out.insert(s.label(), ri);
        }
    }
    Ok(out)
}

// ---- decisions and checkers ------------------------------------------------

/// The decision an agent reached in a run, with the time it first appears.
pub fn decision_of(sys: &System, run: usize, agent: AgentId) -> Option<(Pref, usize)> {
    let r = &sys.runs()[run];
    for t in 0..=r.horizon() {
        if let Some(d) = r
            .local_state_at(agent, t)
            .ok()
            .and_then(|s| s.at("decided"))
            .and_then(Value::as_sym)
        {
            return d.parse().ok().map(|p| (p, t));
        }
    }
    None
}

pub fn final_statuses(sys: &System, run: usize) -> Vec<String> {
    let r = &sys.runs()[run];
    env_statuses(&r.states().last().expect("non-empty").env).unwrap_or_default()
}

#[derive(Clone, Debug)]
pub struct AgreementViolation {
    pub run: usize,
    pub decisions: Vec<(AgentId, Pref)>,
}

#[derive(Clone, Debug, Default)]
pub struct AgreementReport {
    pub violations: Vec<AgreementViolation>,
    /// Nonfaulty agents that never decided (liveness failures).
    pub undecided: Vec<(usize, AgentId)>,
}

impl AgreementReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty() && self.undecided.is_empty()
    }
}

impl fmt::Display for AgreementReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agreement: {} violation(s), {} undecided",
            self.violations.len(),
            self.undecided.len()
        )?;
        for v in self.violations.iter().take(3) {
            let ds = v
                .decisions
                .iter()
                .map(|(a, p)| format!("a{a}={p}"))
                .collect::<Vec<_>>()
                .join(" ");
            write!(f, "\n  run {}: {}", v.run, ds)?;
        }
        Ok(())
    }
}

/// All nonfaulty deciders of each run must agree.
pub fn check_agreement(sys: &System) -> AgreementReport {
    let mut report = AgreementReport::default();
    for ri in 0..sys.runs().len() {
        let statuses = final_statuses(sys, ri);
        let mut decisions = Vec::new();
        for a in AgentId::all(sys.n()) {
            if statuses[a.index()] != "ok" {
                continue;
            }
            match decision_of(sys, ri, a) {
                Some((p, _)) => decisions.push((a, p)),
                None => report.undecided.push((ri, a)),
            }
        }
        let distinct: BTreeSet<Pref> = decisions.iter().map(|&(_, p)| p).collect();
        if distinct.len() > 1 {
            report.violations.push(AgreementViolation { run: ri, decisions });
        }
    }
    report
}

#[derive(Clone, Debug)]
pub struct ValidityViolation {
    pub run: usize,
    pub unanimous: Pref,
    pub decisions: Vec<(AgentId, Option<Pref>)>,
}

#[derive(Clone, Debug, Default)]
pub struct ValidityReport {
    pub violations: Vec<ValidityViolation>,
    /// Failure-free unanimous runs examined.
    pub covered: usize,
}

impl ValidityReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "validity: {} violation(s) over {} unanimous failure-free run(s)",
            self.violations.len(),
            self.covered
        )?;
        for v in self.violations.iter().take(3) {
            write!(f, "\n  run {}: unanimous {} not honored", v.run, v.unanimous)?;
        }
        Ok(())
    }
}

/// In failure-free runs with a unanimous initial preference, everyone must
/// decide that preference.
pub fn check_validity(sys: &System) -> ValidityReport {
    let mut report = ValidityReport::default();
    for (ri, run) in sys.runs().iter().enumerate() {
        let statuses = final_statuses(sys, ri);
        if statuses.iter().any(|s| s != "ok") {
            continue;
        }
        let prefs = match env_prefs(&run.states().last().expect("non-empty").env) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let first = prefs[0];
        if prefs.iter().any(|&p| p != first) {
            continue;
        }
        report.covered += 1;
        let decisions: Vec<(AgentId, Option<Pref>)> = AgentId::all(sys.n())
            .map(|a| (a, decision_of(sys, ri, a).map(|(p, _)| p)))
            .collect();
        if decisions.iter().any(|&(_, d)| d != Some(first)) {
            report.violations.push(ValidityViolation {
                run: ri,
                unanimous: first,
                decisions,
            });
        }
    }
    report
}

#[derive(Clone, Debug)]
pub struct SimultaneityViolation {
    pub run: usize,
    pub decision_times: Vec<(AgentId, usize)>,
}

#[derive(Clone, Debug, Default)]
pub struct SimultaneityReport {
    pub violations: Vec<SimultaneityViolation>,
    /// Every round at which some nonfaulty agent decided, across all runs.
    pub decision_rounds: BTreeSet<usize>,
}

impl SimultaneityReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for SimultaneityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rounds = self
            .decision_rounds
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "simultaneity: {} violation(s); decision rounds {{{rounds}}}",
            self.violations.len()
        )
    }
}

/// All nonfaulty decisions within a run must land on the same round.
pub fn check_simultaneity(sys: &System) -> SimultaneityReport {
    let mut report = SimultaneityReport::default();
    for ri in 0..sys.runs().len() {
        let statuses = final_statuses(sys, ri);
        let times: Vec<(AgentId, usize)> = AgentId::all(sys.n())
            .filter(|a| statuses[a.index()] == "ok")
            .filter_map(|a| decision_of(sys, ri, a).map(|(_, t)| (a, t)))
            .collect();
        let distinct: BTreeSet<usize> = times.iter().map(|&(_, t)| t).collect();
        report.decision_rounds.extend(distinct.iter().copied());
        if distinct.len() > 1 {
            report.violations.push(SimultaneityViolation {
                run: ri,
                decision_times: times,
            });
        }
    }
    report
}

// ---- witnesses -------------------------------------------------------------

/// A replayable counterexample: the preferences and schedule of a run on
/// which nonfaulty deciders split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub prefs: Vec<Pref>,
    pub schedule: AdversarySchedule,
    pub run: usize,
    pub decisions: Vec<(AgentId, Pref)>,
}

impl Witness {
    pub fn to_value(&self) -> Value {
        Value::rec([
            (
                "decisions",
                Value::Rec(
                    self.decisions
                        .iter()
                        .map(|(a, p)| (a.get().to_string(), sym_of_pref(*p)))
                        .collect(),
                ),
            ),
            ("prefs", Value::seq(self.prefs.iter().map(|&p| sym_of_pref(p)))),
            ("schedule", self.schedule.to_value()),
        ])
    }

    pub fn from_value(v: &Value) -> Result<Witness> {
        let bad = |what: &str| Error::Config(format!("bad witness encoding: {what}"));
        let prefs = v
            .at("prefs")
            .and_then(Value::as_seq)
            .ok_or_else(|| bad("prefs"))?
            .iter()
            .map(|x| x.as_sym().ok_or_else(|| bad("pref"))?.parse())
            .collect::<Result<_>>()?;
        let schedule =
            AdversarySchedule::from_value(v.at("schedule").ok_or_else(|| bad("schedule"))?)?;
        let decisions = v
            .at("decisions")
            .and_then(Value::as_rec)
            .ok_or_else(|| bad("decisions"))?
            .iter()
            .map(|(k, x)| {
                let a = k.parse::<usize>().map_err(|_| bad("agent"))?;
                let p = x.as_sym().ok_or_else(|| bad("decision"))?.parse()?;
                Ok((AgentId::new(a), p))
            })
            .collect::<Result<_>>()?;
        Ok(Witness {
            prefs,
            schedule,
            run: 0,
            decisions,
        })
    }
}

/// First run, in canonical order, where agreement fails among nonfaulty
/// deciders.
pub fn find_disagreement(sys: &System, rounds: usize) -> Result<Option<Witness>> {
    let report = check_agreement(sys);
    let Some(v) = report.violations.first() else {
        return Ok(None);
    };
    let (prefs, schedule) = schedule_of_run(&sys.runs()[v.run], rounds)?;
    Ok(Some(Witness {
        prefs,
        schedule,
        run: v.run,
        decisions: v.decisions.clone(),
    }))
}

/// The directive the environment issues at round `r` under `schedule`.
fn schedule_directive(schedule: &AdversarySchedule, r: usize, rounds: usize) -> Vec<Value> {
    if r > rounds {
        return Vec::new();
    }
    let mut faults = Vec::new();
    for (&z, b) in &schedule.faults {
        match b {
            FaultBehavior::Crash { round, deliver_to } => {
                if *round == r {
                    faults.push(crash_record(z, deliver_to));
                }
            }
            FaultBehavior::Omission { omit } => {
                let first_fault = omit.iter().position(|s| !s.is_empty()).map(|i| i + 1);
                if first_fault.map_or(false, |f| r >= f) {
                    faults.push(omit_record(z, &omit[r - 1]));
                }
            }
            FaultBehavior::Byzantine { msgs } => {
                faults.push(byz_record(z, &msgs[r - 1]));
            }
        }
    }
    faults
}

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub decisions: Vec<(AgentId, Option<Pref>)>,
    pub statuses: Vec<String>,
}

impl ReplayOutcome {
    /// True when two final-status-ok agents decided differently.
    pub fn disagrees(&self) -> bool {
        let decided: BTreeSet<Pref> = self
            .decisions
            .iter()
            .filter(|(a, _)| self.statuses[a.index()] == "ok")
            .filter_map(|&(_, d)| d)
            .collect();
        decided.len() > 1
    }
}

/// Re-run a single witness deterministically: same preferences, same
/// schedule, no branching.
pub fn replay_witness(
    fm: &FailureModel,
    rule: DecisionRule,
    w: &Witness,
    claim_bound: usize,
) -> Result<ReplayOutcome> {
    if w.prefs.len() != fm.n {
        return Err(Error::Config(format!(
            "witness has {} preferences for n={}",
            w.prefs.len(),
            fm.n
        )));
    }
    check_claim_bound(fm, fm.rounds(), claim_bound)?;
    let fm_copy = *fm;
    let rounds = fm.rounds();
    let schedule = w.schedule.clone();
    let ctx = Context {
        env: Box::new(move |env: &LocalState| {
            let r = env_round(env).map(|d| d + 1).unwrap_or(1);
            vec![directive_action(schedule_directive(&schedule, r, rounds))]
        }),
        initial_states: vec![initial_global(&w.prefs)],
        transition: Box::new(move |g: &GlobalState, ja: &JointAction| {
            agreement_transition(fm_copy, rule, g, ja)
        }),
        receives: Box::new(|_: &Run, _: AgentId, _: usize| false),
    };
    let sys = generate_system(&ctx, &eig_protocol(fm.n, fm.t)?, rounds, GenOptions::default())?;
    if sys.runs().len() != 1 {
        return Err(Error::Internal(format!(
            "witness replay produced {} runs",
            sys.runs().len()
        )));
    }
    Ok(ReplayOutcome {
        decisions: AgentId::all(fm.n)
            .map(|a| (a, decision_of(&sys, 0, a).map(|(p, _)| p)))
            .collect(),
        statuses: final_statuses(&sys, 0),
    })
}

// ---- lower-bound experiment ------------------------------------------------

/// Holds where some agent's initial preference was attack.
pub fn event_some_attack(sys: &System) -> Event {
    Event::from_fn(sys, "some-pref-attack", |s, p| {
        s.global_state(p)
            .ok()
            .and_then(|g| g.env.at("prefs"))
            .map(|prefs| prefs.contains(&Value::sym("attack")))
            .unwrap_or(false)
    })
}

/// Holds where the faulty set is exactly {z}.
pub fn event_faulty_exactly(sys: &System, z: AgentId) -> Event {
    Event::from_fn(sys, format!("faulty-set-{{{z}}}"), move |s, p| {
        s.global_state(p)
            .ok()
            .and_then(|g| g.env.at("status"))
            .and_then(Value::as_seq)
            .map(|st| {
                st.iter().enumerate().all(|(i, v)| {
                    let ok = v.as_sym() == Some("ok");
                    if i == z.index() {
                        !ok
                    } else {
                        ok
                    }
                })
            })
            .unwrap_or(false)
    })
}

/// The preference vector the experiment tracks: exactly one attacker
/// (agent 1). With more attackers the existential fact is robust enough to
/// be common knowledge after a single round, which would hide the bound.
pub fn reference_prefs(n: usize) -> Vec<Pref> {
    (0..n)
        .map(|i| if i == 0 { Pref::Attack } else { Pref::Retreat })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LowerBoundReport {
    pub n: usize,
    pub t: usize,
    pub rounds: usize,
    pub reference_prefs: Vec<Pref>,
    /// Nonfaulty common knowledge of "someone preferred attack" at the end
    /// of each round of the failure-free reference run.
    pub ck_by_time: Vec<(usize, bool)>,
    pub first_ck_time: Option<usize>,
    /// Earliest common-knowledge time per schedule, on the reference
    /// preferences; None = never within the horizon.
    pub schedule_earliest: Vec<(String, Option<usize>)>,
    pub earliest_summary: BTreeMap<String, usize>,
    /// Per silent crasher z: do all other agents know the faulty set is
    /// exactly {z} at the end of round 1?
    pub fault_id: Vec<(AgentId, bool)>,
}

impl LowerBoundReport {
    pub fn fault_id_ok(&self) -> bool {
        self.fault_id.iter().all(|&(_, ok)| ok)
    }
}

impl fmt::Display for LowerBoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "lower bound: n={} t={} rounds={} reference={}",
            self.n,
            self.t,
            self.rounds,
            self.reference_prefs
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )?;
        for (t, ck) in &self.ck_by_time {
            writeln!(f, "  end of round {t}: common knowledge = {ck}")?;
        }
        writeln!(
            f,
            "  first common knowledge at round: {}",
            self.first_ck_time
                .map(|t| t.to_string())
                .unwrap_or_else(|| "never".into())
        )?;
        for (key, count) in &self.earliest_summary {
            writeln!(f, "  schedules reaching it at {key}: {count}")?;
        }
        for (z, ok) in &self.fault_id {
            writeln!(f, "  silent a{z}: faulty set identified after round 1 = {ok}")?;
        }
        Ok(())
    }
}

/// Crash-model full-information system; tracks when "someone preferred
/// attack" becomes common knowledge among the nonfaulty, schedule by
/// schedule, and whether a round-1-silent crasher is identified at once.
pub fn lower_bound_experiment(n: usize, t: usize, opts: GenOptions) -> Result<LowerBoundReport> {
    let fm = FailureModel::new(FailureKind::Crash, n, t)?;
    let rounds = fm.rounds();
    let sys = run_agreement(&fm, DecisionRule::AnyAttack, rounds, DEFAULT_CLAIM_BOUND, opts)?;
    let prefs = reference_prefs(n);
    let cn = nonfaulty_common_knowledge(&sys, &event_some_attack(&sys))?;

    let by_schedule = runs_by_schedule(&sys, rounds, &prefs)?;
    let reference = *by_schedule
        .get("fault-free")
        .ok_or_else(|| Error::Internal("no fault-free run".into()))?;

    let mut ck_by_time = Vec::new();
    for time in 0..=rounds {
        ck_by_time.push((time, cn.holds_at(&sys, Point::new(reference, time))?));
    }
    let first_ck_time = ck_by_time.iter().find(|&&(_, ck)| ck).map(|&(t, _)| t);

    let mut schedule_earliest = Vec::new();
    let mut earliest_summary: BTreeMap<String, usize> = BTreeMap::new();
    for (label, &ri) in &by_schedule {
        let mut earliest = None;
        for time in 0..=rounds {
            if cn.holds_at(&sys, Point::new(ri, time))? {
                earliest = Some(time);
                break;
            }
        }
        let key = earliest
            .map(|t| format!("round {t}"))
            .unwrap_or_else(|| "never".into());
        *earliest_summary.entry(key).or_insert(0) += 1;
        schedule_earliest.push((label.clone(), earliest));
    }

    let mut fault_id = Vec::new();
    if t >= 1 {
        for z in AgentId::all(n) {
            let silent = AdversarySchedule {
                faults: BTreeMap::from([(
                    z,
                    FaultBehavior::Crash {
                        round: 1,
                        deliver_to: BTreeSet::new(),
                    },
                )]),
            };
            let ri = *by_schedule.get(&silent.label()).ok_or_else(|| {
                Error::Internal(format!("no run for silent schedule of {z}"))
            })?;
            let e = event_faulty_exactly(&sys, z);
            let p = Point::new(ri, 1);
            let mut all_know = true;
            for i in AgentId::all(n).filter(|&i| i != z) {
                all_know &= knows(&sys, i, &e).holds_at(&sys, p)?;
            }
            fault_id.push((z, all_know));
        }
    }

    Ok(LowerBoundReport {
        n,
        t,
        rounds,
        reference_prefs: prefs,
        ck_by_time,
        first_ck_time,
        schedule_earliest,
        earliest_summary,
        fault_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(i: usize) -> AgentId {
        AgentId::new(i)
    }

    fn opts() -> GenOptions {
        GenOptions::default()
    }

    #[test]
    fn crash_schedule_counts_match_closed_form() {
        let fm3 = FailureModel::new(FailureKind::Crash, 3, 1).unwrap();
        let fm4 = FailureModel::new(FailureKind::Crash, 4, 1).unwrap();
        // 1 + n * rounds * 2^(n-1)
        assert_eq!(enumerate_schedules(&fm3, 2, 3).unwrap().len(), 25);
        assert_eq!(enumerate_schedules(&fm4, 2, 3).unwrap().len(), 65);
        let fm0 = FailureModel::new(FailureKind::Crash, 3, 0).unwrap();
        assert_eq!(enumerate_schedules(&fm0, 1, 3).unwrap().len(), 1);
    }

    #[test]
    fn omission_schedules_skip_the_vacuous_one() {
        let fm = FailureModel::new(FailureKind::Omission, 3, 1).unwrap();
        let schedules = enumerate_schedules(&fm, 2, 3).unwrap();
        // 1 + 3 * (4^2 - 1)
        assert_eq!(schedules.len(), 46);
        assert!(schedules.iter().skip(1).all(|s| !s.is_fault_free()));
    }

    #[test]
    fn generated_runs_are_prefs_times_schedules() {
        let fm = FailureModel::new(FailureKind::Crash, 3, 1).unwrap();
        let sys = run_agreement(&fm, DecisionRule::AnyAttack, 2, 3, opts()).unwrap();
        assert_eq!(sys.runs().len(), 200);

        let mut seen: BTreeSet<(Vec<Pref>, AdversarySchedule)> = BTreeSet::new();
        for run in sys.runs() {
            seen.insert(schedule_of_run(run, 2).unwrap());
        }
        assert_eq!(seen.len(), 200);
        let schedules = enumerate_schedules(&fm, 2, 3).unwrap();
        for prefs in all_pref_vectors(3) {
            for s in &schedules {
                assert!(seen.contains(&(prefs.clone(), s.clone())));
            }
        }
    }

    #[test]
    fn two_agents_no_faults_decide_at_round_one() {
        let fm = FailureModel::new(FailureKind::Crash, 2, 0).unwrap();
        let sys = run_agreement(&fm, DecisionRule::AnyAttack, 1, 3, opts()).unwrap();
        assert_eq!(sys.runs().len(), 4);
        assert!(check_agreement(&sys).clean());
        assert!(check_validity(&sys).clean());
        let sim = check_simultaneity(&sys);
        assert!(sim.clean());
        assert_eq!(sim.decision_rounds, BTreeSet::from([1]));
    }

    #[test]
    fn crash_chain_relays_the_attack_preference() {
        // the crasher tells only agent 2, who forwards in round 2
        let fm = FailureModel::new(FailureKind::Crash, 4, 1).unwrap();
        let w = Witness {
            prefs: vec![Pref::Attack, Pref::Retreat, Pref::Retreat, Pref::Retreat],
            schedule: AdversarySchedule {
                faults: BTreeMap::from([(
                    a(1),
                    FaultBehavior::Crash {
                        round: 1,
                        deliver_to: BTreeSet::from([a(2)]),
                    },
                )]),
            },
            run: 0,
            decisions: Vec::new(),
        };
        let out = replay_witness(&fm, DecisionRule::AnyAttack, &w, 3).unwrap();
        assert_eq!(out.statuses, vec!["crashed", "ok", "ok", "ok"]);
        for (agent, d) in &out.decisions {
            if agent.get() == 1 {
                assert_eq!(*d, None);
            } else {
                assert_eq!(*d, Some(Pref::Attack), "agent {agent}");
            }
        }
        assert!(!out.disagrees());
    }

    #[test]
    fn always_retreat_agrees_but_flunks_validity() {
        let fm = FailureModel::new(FailureKind::Crash, 3, 0).unwrap();
        let sys = run_agreement(&fm, DecisionRule::AlwaysRetreat, 1, 3, opts()).unwrap();
        assert!(check_agreement(&sys).clean());
        let validity = check_validity(&sys);
        assert_eq!(validity.violations.len(), 1);
        assert_eq!(validity.violations[0].unanimous, Pref::Attack);
    }

    #[test]
    fn byzantine_search_finds_replayable_disagreement() {
        let fm = FailureModel::new(FailureKind::Byzantine, 3, 1).unwrap();
        assert_eq!(enumerate_schedules(&fm, 2, 3).unwrap().len(), 2188);
        let sys = run_agreement(&fm, DecisionRule::AnyAttack, 2, 3, opts()).unwrap();
        assert_eq!(sys.runs().len(), 8 * 2188);

        let w = find_disagreement(&sys, 2).unwrap().expect("witness exists");
        assert!(matches!(
            w.schedule.faults.values().next(),
            Some(FaultBehavior::Byzantine { .. })
        ));
        let out = replay_witness(&fm, DecisionRule::AnyAttack, &w, 3).unwrap();
        assert!(out.disagrees());
        for (agent, d) in &w.decisions {
            assert_eq!(out.decisions[agent.index()].1, Some(*d));
        }

        let roundtrip = Witness::from_value(&w.to_value()).unwrap();
        assert_eq!(roundtrip.schedule, w.schedule);
        assert_eq!(roundtrip.prefs, w.prefs);
    }

    #[test]
    fn claim_bound_rejects_oversized_forgery_language() {
        let fm = FailureModel::new(FailureKind::Byzantine, 5, 2).unwrap();
        let err = enumerate_schedules(&fm, 3, 3).unwrap_err();
        match err {
            Error::Combinatorics { needed, bound, .. } => {
                assert_eq!(needed, 4); // depth-1 paths at round 2 already overflow
                assert_eq!(bound, 3);
            }
            other => panic!("expected combinatorics error, got {other}"),
        }
    }

    #[test]
    fn lower_bound_small_instance() {
        let report = lower_bound_experiment(3, 1, opts()).unwrap();
        assert_eq!(
            report.ck_by_time,
            vec![(0, false), (1, false), (2, true)]
        );
        assert_eq!(report.first_ck_time, Some(2));
        assert!(report.fault_id_ok());
        // the only schedule never reaching common knowledge is the
        // attacker crashing silently in round 1
        assert_eq!(
            report.earliest_summary,
            BTreeMap::from([("round 2".to_string(), 24), ("never".to_string(), 1)])
        );
        let never: Vec<_> = report
            .schedule_earliest
            .iter()
            .filter(|(_, t)| t.is_none())
            .collect();
        assert_eq!(never.len(), 1);
        assert_eq!(never[0].0, "crash(a1@r1,to={})");
    }
}
