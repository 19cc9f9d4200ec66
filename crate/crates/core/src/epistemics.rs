//! Knowledge operators over systems.
//!
//! `knows` is the textbook S5 box: agent i knows e at p when e holds
//! throughout i's information set. `everyone_knows` intersects over a group,
//! which may be *indexical*: membership decided per point (for example "the
//! agents that have not failed here"). `common_knowledge` is the greatest
//! fixpoint of X = E_G(e and X); with reflexive indistinguishability the
//! chain is decreasing, so it stabilizes within |points| iterations.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::state::{AgentId, Point};
use crate::system::System;

type MembershipFn = dyn Fn(&System, Point, AgentId) -> bool + Send + Sync;

/// Point-dependent group membership.
#[derive(Clone)]
pub struct IndexicalGroup {
    name: String,
    member: Arc<MembershipFn>,
}

impl IndexicalGroup {
    pub fn new(
        name: impl Into<String>,
        member: impl Fn(&System, Point, AgentId) -> bool + Send + Sync + 'static,
    ) -> IndexicalGroup {
        IndexicalGroup {
            name: name.into(),
            member: Arc::new(member),
        }
    }
}

#[derive(Clone)]
pub enum AgentGroup {
    Fixed(BTreeSet<AgentId>),
    Indexical(IndexicalGroup),
}

impl AgentGroup {
    /// Panics on an empty id list; fixed groups must be non-empty.
    pub fn fixed(ids: impl IntoIterator<Item = usize>) -> AgentGroup {
        let set: BTreeSet<AgentId> = ids.into_iter().map(AgentId::new).collect();
        assert!(!set.is_empty(), "fixed agent groups must be non-empty");
        AgentGroup::Fixed(set)
    }

    pub fn everyone(n: usize) -> AgentGroup {
        AgentGroup::fixed(1..=n)
    }

    /// The agents whose environment fault flag reads "ok" at each point.
    pub fn nonfaulty() -> AgentGroup {
        AgentGroup::Indexical(IndexicalGroup::new("nonfaulty", |sys, p, agent| {
            nonfaulty_at(sys, p, agent) == Some(true)
        }))
    }

    fn contains(&self, sys: &System, p: Point, agent: AgentId) -> bool {
        match self {
            AgentGroup::Fixed(set) => set.contains(&agent),
            AgentGroup::Indexical(g) => (g.member)(sys, p, agent),
        }
    }
}

impl fmt::Display for AgentGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentGroup::Fixed(set) => {
                write!(f, "{{")?;
                for (i, a) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, "}}")
            }
            AgentGroup::Indexical(g) => write!(f, "{}", g.name),
        }
    }
}

/// Reads the per-agent fault flag a context wrote into the environment
/// state, if any: `status` is a sequence with one entry per agent, `ok` for
/// nonfaulty. `None` when the flag is absent or malformed.
pub fn nonfaulty_at(sys: &System, p: Point, agent: AgentId) -> Option<bool> {
    let g = sys.global_state(p).ok()?;
    let status = g.env.at("status")?.as_seq()?;
    let entry = status.get(agent.index())?;
    Some(entry.as_sym() == Some("ok"))
}

/// K_i(e): the points where every point i considers possible satisfies e.
pub fn knows(sys: &System, agent: AgentId, e: &Event) -> Event {
    assert!(
        agent.get() <= sys.n(),
        "agent {agent} out of range for knows()"
    );
    let mut bits = FixedBitSet::with_capacity(sys.num_points());
    for class in sys.classes(agent) {
        if class.iter().all(|&id| e.bits().contains(id as usize)) {
            for &id in class {
                bits.insert(id as usize);
            }
        }
    }
    Event::from_bits(format!("K({agent},{})", e.name()), bits)
}

/// E_G(e): at each point, every group member there knows e. Vacuously true
/// at points where an indexical group is empty.
pub fn everyone_knows(sys: &System, group: &AgentGroup, e: &Event) -> Event {
    let per_agent: Vec<Event> = AgentId::all(sys.n()).map(|a| knows(sys, a, e)).collect();
    let mut bits = FixedBitSet::with_capacity(sys.num_points());
    for p in sys.points() {
        let id = sys.point_id(p).expect("point from iterator");
        let ok = AgentId::all(sys.n())
            .filter(|&a| group.contains(sys, p, a))
            .all(|a| per_agent[a.index()].bits().contains(id));
        if ok {
            bits.insert(id);
        }
    }
    Event::from_bits(format!("E({group},{})", e.name()), bits)
}

/// C_G(e): greatest fixpoint of X = E_G(e and X).
pub fn common_knowledge(sys: &System, group: &AgentGroup, e: &Event) -> Event {
    let mut x = Event::full(sys, "x");
    for _ in 0..=sys.num_points() {
        let next = everyone_knows(sys, group, &e.and(&x, "ex"));
        if next.same_points(&x) {
            break;
        }
        x = next;
    }
    x.rename(format!("C({group},{})", e.name()))
}

/// Largest k <= max_k with E_G^k(e) true at p; k = 0 means e itself holds.
/// Returns -1 when e fails at p.
pub fn knowledge_depth(
    sys: &System,
    group: &AgentGroup,
    e: &Event,
    p: Point,
    max_k: usize,
) -> Result<i64> {
    if !e.holds_at(sys, p)? {
        return Ok(-1);
    }
    let mut cur = e.clone();
    let mut depth = 0i64;
    for _ in 0..max_k {
        cur = everyone_knows(sys, group, &cur);
        if !cur.holds_at(sys, p)? {
            break;
        }
        depth += 1;
    }
    Ok(depth)
}

/// Common knowledge among the indexical nonfaulty group. Errors when the
/// system's environment states do not carry per-agent fault flags.
pub fn nonfaulty_common_knowledge(sys: &System, e: &Event) -> Result<Event> {
    for p in sys.points() {
        for agent in AgentId::all(sys.n()) {
            if nonfaulty_at(sys, p, agent).is_none() {
                return Err(Error::Config(format!(
                    "environment state at {p} carries no fault flag for agent {agent}; \
                     nonfaulty common knowledge needs a status field"
                )));
            }
        }
    }
    Ok(common_knowledge(sys, &AgentGroup::nonfaulty(), e).rename(format!("CN({})", e.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{GlobalState, LocalState, Run};
    use crate::value::Value;

    // Two agents, one round. Agent 1 learns the coin at time 1; agent 2
    // never does.
    fn coin_system() -> System {
        let g = |coin: &str, seen: bool, t: i64| {
            GlobalState::new(
                Value::rec([("coin", Value::sym(coin))]),
                vec![
                    LocalState(Value::rec([(
                        "saw",
                        if seen { Value::sym(coin) } else { Value::Unit },
                    ), ("t", Value::Int(t))])),
                    LocalState(Value::rec([("t", Value::Int(t))])),
                ],
            )
        };
        System::new(vec![
            Run::new(vec![g("heads", false, 0), g("heads", true, 1)]).unwrap(),
            Run::new(vec![g("tails", false, 0), g("tails", true, 1)]).unwrap(),
        ])
        .unwrap()
    }

    fn heads(sys: &System) -> Event {
        Event::from_fn(sys, "heads", |s, p| {
            s.global_state(p).unwrap().env.at("coin").and_then(Value::as_sym) == Some("heads")
        })
    }

    #[test]
    fn knows_requires_the_whole_information_set() {
        let sys = coin_system();
        let e = heads(&sys);
        let k1 = knows(&sys, AgentId::new(1), &e);
        let k2 = knows(&sys, AgentId::new(2), &e);
        assert!(k1.holds_at(&sys, Point::new(0, 1)).unwrap());
        assert!(!k1.holds_at(&sys, Point::new(0, 0)).unwrap());
        assert!(k2.is_empty());
    }

    #[test]
    fn everyone_knows_is_intersection_for_fixed_groups() {
        let sys = coin_system();
        let e = heads(&sys);
        let g = AgentGroup::everyone(2);
        let ek = everyone_knows(&sys, &g, &e);
        let k1 = knows(&sys, AgentId::new(1), &e);
        let k2 = knows(&sys, AgentId::new(2), &e);
        assert!(ek.same_points(&k1.and(&k2, "both")));
    }

    #[test]
    fn common_knowledge_of_contingent_fact_is_empty_here() {
        let sys = coin_system();
        let e = heads(&sys);
        let c = common_knowledge(&sys, &AgentGroup::everyone(2), &e);
        assert!(c.is_empty());
        // but CK of the trivial event is everything
        let t = Event::full(&sys, "true");
        let ct = common_knowledge(&sys, &AgentGroup::everyone(2), &t);
        assert_eq!(ct.count(), sys.num_points());
    }

    #[test]
    fn depth_sentinel_when_event_fails() {
        let sys = coin_system();
        let e = heads(&sys);
        let g = AgentGroup::everyone(2);
        assert_eq!(
            knowledge_depth(&sys, &g, &e, Point::new(1, 0), 4).unwrap(),
            -1
        );
        assert_eq!(
            knowledge_depth(&sys, &g, &e, Point::new(0, 1), 4).unwrap(),
            0
        );
    }

    #[test]
    fn vacuous_everyone_knows_for_empty_indexical_group() {
        let sys = coin_system();
        let e = heads(&sys);
        let nobody = AgentGroup::Indexical(IndexicalGroup::new("nobody", |_, _, _| false));
        let ek = everyone_knows(&sys, &nobody, &e);
        assert_eq!(ek.count(), sys.num_points());
    }

    #[test]
    fn nonfaulty_ck_needs_fault_flags() {
        let sys = coin_system();
        let e = heads(&sys);
        assert!(matches!(
            nonfaulty_common_knowledge(&sys, &e),
            Err(Error::Config(_))
        ));
    }
}
