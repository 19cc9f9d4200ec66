//! The two-generals coordination problem over a lossy messenger.
//!
//! General A (agent 1) may intend an attack; if so, the protocol sends
//! "attack at dawn" to general B (agent 2) and the generals then alternate
//! acknowledgments, one transit in flight per round, up to a transit cap.
//! The environment decides each attempted transit: delivered or lost. The
//! initial states cover both "A intends to attack" and "A does not", so
//! receiving nothing never tells B which world he is in.
//!
//! On top of the generated system this module checks the two classic facts:
//! message delivery never becomes common knowledge when the messenger is
//! lossy, and any attack rule whose attack event is not common knowledge at
//! every attacking point is either unsound or vacuous.

use std::fmt;
use std::str::FromStr;

use crate::engine::{Action, Context, GenOptions, JointAction, JointProtocol};
use crate::epistemics::{common_knowledge, AgentGroup};
use crate::error::{Error, Result};
use crate::event::Event;
use crate::state::{AgentId, GlobalState, LocalState, Point, Run};
use crate::system::System;
use crate::value::Value;

pub const GENERAL_A: usize = 1;
pub const GENERAL_B: usize = 2;

pub const DEFAULT_MAX_TRANSITS: usize = 4;
pub const DEFAULT_HORIZON: usize = 6;

/// When the generals decide to attack. `Never` is the only rule that is both
/// sound and attainable over a lossy messenger; the other two exist to give
/// the checker something to catch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackRule {
    Never,
    /// A attacks once it has sent the message, B once it has received it.
    /// Coordinated under guaranteed delivery, one-sided when the first
    /// transit is lost.
    SendReceive,
    /// Each general attacks once its inbox is non-empty, i.e. once it holds
    /// direct evidence of a delivery. Not even simultaneous when everything
    /// arrives.
    OnDelivery,
}

impl fmt::Display for AttackRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttackRule::Never => "never",
            AttackRule::SendReceive => "send-receive",
            AttackRule::OnDelivery => "on-delivery",
        };
        write!(f, "{s}")
    }
}

impl FromStr for AttackRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<AttackRule> {
        match s {
            "never" => Ok(AttackRule::Never),
            "send-receive" => Ok(AttackRule::SendReceive),
            "on-delivery" => Ok(AttackRule::OnDelivery),
            other => Err(Error::Config(format!(
                "unknown attack rule '{other}' (expected never, send-receive, or on-delivery)"
            ))),
        }
    }
}

/// Outcome annotations for terminal states; purely descriptive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Payoffs {
    pub one_sided: i64,
    pub neither: i64,
    pub both: i64,
}

impl Payoffs {
    pub fn new(one_sided: i64, neither: i64, both: i64) -> Result<Payoffs> {
        if !(one_sided < neither && neither < both) {
            return Err(Error::Config(format!(
                "payoffs must be strictly ordered: one-sided {one_sided} < neither {neither} < both {both}"
            )));
        }
        Ok(Payoffs {
            one_sided,
            neither,
            both,
        })
    }
}

#[derive(Clone, Debug)]
pub struct MessengerScenario {
    pub max_transits: usize,
    pub horizon: usize,
    pub reliable: bool,
    pub attack_rule: AttackRule,
    pub payoffs: Option<Payoffs>,
}

impl Default for MessengerScenario {
    fn default() -> Self {
        MessengerScenario {
            max_transits: DEFAULT_MAX_TRANSITS,
            horizon: DEFAULT_HORIZON,
            reliable: false,
            attack_rule: AttackRule::Never,
            payoffs: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitOutcome {
    Delivered,
    Lost,
}

/// A resolved delivery choice for every transit the messenger could carry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeliveryPattern(pub Vec<TransitOutcome>);

impl DeliveryPattern {
    /// All 2^max_transits patterns the environment could choose from,
    /// before the protocol prunes unreachable attempts.
    pub fn enumerate(max_transits: usize) -> Vec<DeliveryPattern> {
        let mut out = Vec::with_capacity(1 << max_transits);
        for mask in 0..(1u64 << max_transits) {
            out.push(DeliveryPattern(
                (0..max_transits)
                    .map(|i| {
                        if mask & (1 << i) != 0 {
                            TransitOutcome::Delivered
                        } else {
                            TransitOutcome::Lost
                        }
                    })
                    .collect(),
            ));
        }
        out
    }
}

/// Which general carries transit `m`: A sends the odd transits.
fn sender_of_transit(m: usize) -> AgentId {
    if m % 2 == 1 {
        AgentId::new(GENERAL_A)
    } else {
        AgentId::new(GENERAL_B)
    }
}

fn receiver_of_transit(m: usize) -> AgentId {
    if m % 2 == 1 {
        AgentId::new(GENERAL_B)
    } else {
        AgentId::new(GENERAL_A)
    }
}

fn transit_label(m: usize) -> &'static str {
    if m == 1 {
        "attack-at-dawn"
    } else {
        "ack"
    }
}

fn outcomes_of_env(env: &LocalState) -> Vec<String> {
    env.at("outcomes")
        .and_then(Value::as_seq)
        .map(|items| {
            items
                .iter()
                .filter_map(|v| v.as_sym().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

/// Transit `m` is attempted when A intends the attack, the cap allows it,
/// and every earlier transit got through.
fn transit_attempted(env: &LocalState, m: usize) -> bool {
    let intent = env.at("intent").and_then(Value::as_sym) == Some("go");
    let cap = env.at("transits").and_then(Value::as_int).unwrap_or(0) as usize;
    let outcomes = outcomes_of_env(env);
    intent && m <= cap && outcomes.len() == m - 1 && outcomes.iter().all(|o| o == "delivered")
}

fn inbox_has(local: &LocalState, at: usize) -> bool {
    local
        .at("inbox")
        .and_then(Value::as_seq)
        .map(|items| {
            items
                .iter()
                .any(|e| e.field("at").and_then(Value::as_int) == Some(at as i64))
        })
        .unwrap_or(false)
}

fn has_any(local: &LocalState, field: &str) -> bool {
    local
        .at(field)
        .and_then(Value::as_seq)
        .map(|items| !items.is_empty())
        .unwrap_or(false)
}

/// The alternating-acknowledgment protocol with a cap of `max_transits`
/// transits in total. Pure send logic; attack rules are applied by the
/// context's transition.
pub fn acknowledgment_protocol(max_transits: usize) -> JointProtocol {
    let policy = move |me: usize| {
        move |state: &LocalState| -> Option<Action> {
            let round = state.at("round").and_then(Value::as_int)? as usize;
            let m = round + 1;
            if m > max_transits || sender_of_transit(m).get() != me {
                return Some(Action::noop());
            }
            let ready = if m == 1 {
                state.at("intent").and_then(Value::as_sym) == Some("go")
            } else {
                inbox_has(state, m - 1)
            };
            if ready {
                Some(Action::new(
                    "send",
                    Value::rec([("transit", Value::from(m)), ("msg", Value::sym(transit_label(m)))]),
                ))
            } else {
                Some(Action::noop())
            }
        }
    };
    JointProtocol {
        agents: vec![Box::new(policy(GENERAL_A)), Box::new(policy(GENERAL_B))],
    }
}

fn apply_attack_rule(rule: AttackRule, agent: AgentId, local: Value, round: usize) -> Value {
    if local.field("attack").is_some() {
        return local;
    }
    let triggered = match rule {
        AttackRule::Never => false,
        AttackRule::SendReceive => {
            if agent.get() == GENERAL_A {
                has_any(&LocalState(local.clone()), "sent")
            } else {
                has_any(&LocalState(local.clone()), "inbox")
            }
        }
        AttackRule::OnDelivery => has_any(&LocalState(local.clone()), "inbox"),
    };
    if triggered {
        local.with("attack", Value::from(round))
    } else {
        local
    }
}

pub fn build_messenger_context(sc: &MessengerScenario) -> Context {
    let reliable = sc.reliable;
    let rule = sc.attack_rule;
    let k = sc.max_transits;

    let env_policy = move |env: &LocalState| -> Vec<Action> {
        let round = env.at("round").and_then(Value::as_int).unwrap_or(0) as usize;
        let m = round + 1;
        if transit_attempted(env, m) {
            if reliable {
                vec![Action::new("deliver", Value::Unit)]
            } else {
                vec![
                    Action::new("deliver", Value::Unit),
                    Action::new("lose", Value::Unit),
                ]
            }
        } else {
            vec![Action::noop()]
        }
    };

    let transition = move |g: &GlobalState, ja: &JointAction| -> Result<GlobalState> {
        let round = g.env.at("round").and_then(Value::as_int).unwrap_or(0) as usize;
        let m = round + 1;
        let attempted = transit_attempted(&g.env, m);
        let delivered = match (attempted, ja.env.label.as_str()) {
            (true, "deliver") => true,
            (true, "lose") => false,
            (false, "noop") => false,
            (att, other) => {
                return Err(Error::Internal(format!(
                    "messenger transition: env action '{other}' with transit attempted={att}"
                )))
            }
        };

        let mut env = g.env.0.clone().with("round", Value::from(m));
        if attempted {
            let outcome = if delivered { "delivered" } else { "lost" };
            let outcomes = env.field("outcomes").cloned().unwrap_or(Value::seq([]));
            env = env.with("outcomes", outcomes.push(Value::sym(outcome)));
        }

        let mut locals = Vec::with_capacity(g.locals.len());
        for agent in AgentId::all(g.n()) {
            let mut local = g.local(agent)?.0.clone().with("round", Value::from(m));
            if attempted && sender_of_transit(m) == agent {
                let entry = Value::rec([
                    ("at", Value::from(m)),
                    ("msg", Value::sym(transit_label(m))),
                ]);
                let sent = local.field("sent").cloned().unwrap_or(Value::seq([]));
                local = local.with("sent", sent.push(entry));
            }
            if attempted && delivered && receiver_of_transit(m) == agent {
                let entry = Value::rec([
                    ("at", Value::from(m)),
                    ("msg", Value::sym(transit_label(m))),
                ]);
                let inbox = local.field("inbox").cloned().unwrap_or(Value::seq([]));
                local = local.with("inbox", inbox.push(entry));
            }
            local = apply_attack_rule(rule, agent, local, m);
            locals.push(LocalState(local));
        }
        Ok(GlobalState::new(env, locals))
    };

    let receives = |run: &Run, agent: AgentId, time: usize| -> bool {
        run.local_state_at(agent, time)
            .map(|l| inbox_has(l, time))
            .unwrap_or(false)
    };

    let initial = |intent: &str| {
        GlobalState::new(
            Value::rec([
                ("round", Value::from(0usize)),
                ("intent", Value::sym(intent)),
                ("transits", Value::from(k)),
                ("outcomes", Value::seq([])),
            ]),
            vec![
                LocalState(Value::rec([
                    ("round", Value::from(0usize)),
                    ("intent", Value::sym(intent)),
                    ("inbox", Value::seq([])),
                    ("sent", Value::seq([])),
                ])),
                LocalState(Value::rec([
                    ("round", Value::from(0usize)),
                    ("inbox", Value::seq([])),
                    ("sent", Value::seq([])),
                ])),
            ],
        )
    };

    Context {
        env: Box::new(env_policy),
        // "go" and "none": B's silence never reveals whether A ever planned
        // anything, which is what keeps the sent event contingent.
        initial_states: vec![initial("go"), initial("none")],
        transition: Box::new(transition),
        receives: Box::new(receives),
    }
}

/// Generate the full messenger system for a scenario.
pub fn messenger_system(sc: &MessengerScenario, opts: GenOptions) -> Result<System> {
    let ctx = build_messenger_context(sc);
    let jp = acknowledgment_protocol(sc.max_transits);
    crate::engine::generate_system(&ctx, &jp, sc.horizon, opts)
}

/// "A message saying attack at dawn was sent": true from the round A hands
/// the message to the messenger, in runs where it does.
pub fn sent_event(sys: &System) -> Event {
    Event::from_fn(sys, "sent", |s, p| {
        !outcomes_of_env(&s.global_state(p).unwrap().env).is_empty()
    })
}

/// At least one transit has been delivered by this point.
pub fn delivered_event(sys: &System) -> Event {
    Event::from_fn(sys, "delivered", |s, p| {
        outcomes_of_env(&s.global_state(p).unwrap().env)
            .iter()
            .any(|o| o == "delivered")
    })
}

fn attacked(local: &LocalState) -> bool {
    local.at("attack").is_some()
}

/// Both generals have attacked.
pub fn attack_event(sys: &System) -> Event {
    Event::from_fn(sys, "attack", |s, p| {
        let g = s.global_state(p).unwrap();
        g.locals.iter().all(attacked)
    })
}

/// Exactly one general has attacked: a coordination failure.
pub fn one_sided_attack_event(sys: &System) -> Event {
    Event::from_fn(sys, "one-sided-attack", |s, p| {
        let g = s.global_state(p).unwrap();
        g.locals.iter().filter(|l| attacked(l)).count() == 1
    })
}

/// Index of the run whose transits were all attempted and all delivered.
pub fn all_delivered_run(sys: &System, transits: usize) -> Option<usize> {
    sys.runs().iter().position(|r| {
        let outcomes = outcomes_of_env(&r.states().last().unwrap().env);
        outcomes.len() == transits && outcomes.iter().all(|o| o == "delivered")
    })
}

#[derive(Clone, Debug)]
pub struct NoCkReport {
    /// Points where delivery is common knowledge between the generals.
    pub ck_points: Vec<Point>,
    pub delivered_points: usize,
}

impl NoCkReport {
    pub fn holds(&self) -> bool {
        self.ck_points.is_empty()
    }
}

/// Check that delivery of a message never becomes common knowledge.
pub fn verify_no_ck_delivery(sys: &System) -> NoCkReport {
    let delivered = delivered_event(sys);
    let ck = common_knowledge(sys, &AgentGroup::fixed([GENERAL_A, GENERAL_B]), &delivered);
    NoCkReport {
        ck_points: ck.points(sys),
        delivered_points: delivered.count(),
    }
}

#[derive(Clone, Debug)]
pub struct AttackCkReport {
    /// Points where exactly one general attacks; any entry means the rule
    /// violates the coordination requirement outright.
    pub one_sided: Vec<Point>,
    pub attack_points: usize,
    /// Attack points where the attack is not common knowledge.
    pub missing_ck: Vec<Point>,
}

impl AttackCkReport {
    pub fn coordinated(&self) -> bool {
        self.one_sided.is_empty()
    }

    pub fn holds(&self) -> bool {
        self.coordinated() && self.missing_ck.is_empty()
    }
}

/// Check that whenever an attack happens it is common knowledge that it
/// does, and that no point sees a one-sided attack.
pub fn verify_attack_requires_ck(sys: &System) -> AttackCkReport {
    let attack = attack_event(sys);
    let one_sided = one_sided_attack_event(sys);
    let ck = common_knowledge(sys, &AgentGroup::fixed([GENERAL_A, GENERAL_B]), &attack);
    let missing = attack.minus(&ck, "attack-not-ck");
    AttackCkReport {
        one_sided: one_sided.points(sys),
        attack_points: attack.count(),
        missing_ck: missing.points(sys),
    }
}

/// Terminal payoff of each run under the scenario's annotation.
pub fn run_payoffs(sys: &System, payoffs: Payoffs) -> Vec<i64> {
    sys.runs()
        .iter()
        .map(|r| {
            let last = r.states().last().unwrap();
            let attackers = last.locals.iter().filter(|l| attacked(l)).count();
            match attackers {
                0 => payoffs.neither,
                n if n == last.n() => payoffs.both,
                _ => payoffs.one_sided,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(k: usize, horizon: usize) -> MessengerScenario {
        MessengerScenario {
            max_transits: k,
            horizon,
            ..MessengerScenario::default()
        }
    }

    #[test]
    fn pattern_enumeration_is_exponential() {
        assert_eq!(DeliveryPattern::enumerate(3).len(), 8);
        assert_eq!(DeliveryPattern::enumerate(0).len(), 1);
    }

    #[test]
    fn run_counts_follow_delivery_prefixes() {
        // k transits yield one run per delivery pattern the protocol can
        // realize (every strict prefix of deliveries ending in a loss, plus
        // the all-delivered run), plus the run where A never intends to go.
        let opts = GenOptions::default();
        for (k, expect) in [(0, 2), (1, 3), (2, 4), (3, 5)] {
            let sys = messenger_system(&sc(k, 4), opts).unwrap();
            assert_eq!(sys.runs().len(), expect, "k={k}");
        }
    }

    #[test]
    fn information_set_of_b_merges_loss_and_silence() {
        let sys = messenger_system(&sc(1, 2), GenOptions::default()).unwrap();
        // Locate the lost run and the no-intent run.
        let lost = sys
            .runs()
            .iter()
            .position(|r| outcomes_of_env(&r.states().last().unwrap().env) == vec!["lost"])
            .unwrap();
        let idle = sys
            .runs()
            .iter()
            .position(|r| {
                r.states()[0].env.at("intent").and_then(Value::as_sym) == Some("none")
            })
            .unwrap();
        let b = AgentId::new(GENERAL_B);
        let iset = sys
            .information_set(Point::new(lost, 1), b)
            .unwrap();
        assert!(iset.contains(&Point::new(idle, 1)));
        assert_eq!(iset.len(), 2);
        // A always knows its own intent.
        let a = AgentId::new(GENERAL_A);
        assert!(!sys
            .indistinguishable(Point::new(lost, 1), Point::new(idle, 1), a)
            .unwrap());
    }

    #[test]
    fn delivery_resolves_to_distinct_b_states() {
        let sys = messenger_system(&sc(1, 2), GenOptions::default()).unwrap();
        let delivered = all_delivered_run(&sys, 1).unwrap();
        let b = AgentId::new(GENERAL_B);
        let iset = sys.information_set(Point::new(delivered, 1), b).unwrap();
        assert_eq!(iset, vec![Point::new(delivered, 1)]);
    }

    #[test]
    fn never_rule_produces_no_attacks() {
        let sys = messenger_system(&sc(2, 3), GenOptions::default()).unwrap();
        assert!(attack_event(&sys).is_empty());
        let report = verify_attack_requires_ck(&sys);
        assert!(report.holds());
        assert_eq!(report.attack_points, 0);
    }

    #[test]
    fn send_receive_rule_is_one_sided_when_lossy() {
        let mut scenario = sc(1, 2);
        scenario.attack_rule = AttackRule::SendReceive;
        let sys = messenger_system(&scenario, GenOptions::default()).unwrap();
        let report = verify_attack_requires_ck(&sys);
        assert!(!report.coordinated());
    }

    #[test]
    fn send_receive_rule_coordinates_under_reliable_delivery() {
        let mut scenario = sc(1, 3);
        scenario.attack_rule = AttackRule::SendReceive;
        scenario.reliable = true;
        let sys = messenger_system(&scenario, GenOptions::default()).unwrap();
        let report = verify_attack_requires_ck(&sys);
        assert!(report.holds(), "one_sided={:?} missing_ck={:?}", report.one_sided, report.missing_ck);
        assert!(report.attack_points > 0);
    }

    #[test]
    fn payoffs_annotate_terminal_outcomes() {
        let payoffs = Payoffs::new(-1, 0, 5).unwrap();
        let mut scenario = sc(1, 2);
        scenario.attack_rule = AttackRule::SendReceive;
        let sys = messenger_system(&scenario, GenOptions::default()).unwrap();
        let values = run_payoffs(&sys, payoffs);
        assert!(values.contains(&-1)); // lost run: A attacked alone
        assert!(values.contains(&5)); // delivered run: both attacked
        assert!(values.contains(&0)); // idle run
        assert!(Payoffs::new(3, 2, 1).is_err());
    }
}
