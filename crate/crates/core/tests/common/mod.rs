//! Shared helpers for the integration tests: a seeded generator for small
//! arbitrary systems and a checker for the epistemic laws that should hold
//! on every one of them.

#![allow(dead_code)]

use runsys::epistemics::{common_knowledge, everyone_knows, knows, AgentGroup};
use runsys::{AgentId, Event, GlobalState, LocalState, Point, Run, System, Value};

/// xorshift64; deterministic across platforms so seeded tests reproduce.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed | 1)
    }

    pub fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// A small arbitrary system: up to 3 agents, up to 6 distinct runs, horizon
/// up to 4. Local states draw from a three-symbol alphabet so information
/// sets merge points often enough to exercise the operators.
pub fn random_system(rng: &mut Rng) -> System {
    let n = 1 + rng.below(3) as usize;
    let num_runs = 1 + rng.below(6) as usize;
    let horizon = rng.below(5) as usize;
    let syms = ["red", "green", "blue"];
    let mut runs = Vec::new();
    for _ in 0..num_runs {
        let mut states = Vec::new();
        for _ in 0..=horizon {
            let env = Value::sym(syms[rng.below(3) as usize]);
            let locals = (0..n)
                .map(|_| LocalState::from(Value::sym(syms[rng.below(3) as usize])))
                .collect();
            states.push(GlobalState::new(env, locals));
        }
        runs.push(Run::new(states).expect("nonempty run"));
    }
    System::new(runs).expect("valid random system")
}

/// An arbitrary subset of the system's points.
pub fn random_event(sys: &System, rng: &mut Rng, name: &str) -> Event {
    let picks: Vec<bool> = (0..sys.num_points()).map(|_| rng.below(2) == 1).collect();
    Event::from_fn(sys, name, |s, p| picks[s.point_id(p).expect("live point")])
}

/// Every epistemic law the partition semantics promises, checked on one
/// system with two arbitrary events. Returns the first violation as text.
pub fn check_epistemic_laws(sys: &System, e: &Event, f: &Event) -> Result<(), String> {
    let pts: Vec<Point> = sys.points().collect();

    for agent in AgentId::all(sys.n()) {
        for &p in &pts {
            if !sys.indistinguishable(p, p, agent).unwrap() {
                return Err(format!("~{agent} not reflexive at {p:?}"));
            }
        }
        for &p in &pts {
            for &q in &pts {
                let pq = sys.indistinguishable(p, q, agent).unwrap();
                if pq != sys.indistinguishable(q, p, agent).unwrap() {
                    return Err(format!("~{agent} not symmetric at {p:?},{q:?}"));
                }
                if !pq {
                    continue;
                }
                for &r in &pts {
                    if sys.indistinguishable(q, r, agent).unwrap()
                        && !sys.indistinguishable(p, r, agent).unwrap()
                    {
                        return Err(format!("~{agent} not transitive at {p:?},{q:?},{r:?}"));
                    }
                }
            }
        }
    }

    for agent in AgentId::all(sys.n()) {
        let ke = knows(sys, agent, e);
        if !ke.is_subset(e) {
            return Err(format!("truth fails for agent {agent}"));
        }
        let kke = knows(sys, agent, &ke);
        if !ke.same_points(&kke) {
            return Err(format!("positive introspection fails for agent {agent}"));
        }
        let not_ke = ke.not("nk");
        let k_not_ke = knows(sys, agent, &not_ke);
        if !not_ke.same_points(&k_not_ke) {
            return Err(format!("negative introspection fails for agent {agent}"));
        }
        let kef = knows(sys, agent, &e.or(f, "ef"));
        if !ke.is_subset(&kef) {
            return Err(format!("monotonicity fails for agent {agent}"));
        }
    }

    let g = AgentGroup::everyone(sys.n());
    let eg = everyone_knows(sys, &g, e);
    let mut inter = Event::full(sys, "inter");
    for agent in AgentId::all(sys.n()) {
        inter = inter.and(&knows(sys, agent, e), "inter");
    }
    if !eg.same_points(&inter) {
        return Err("E is not the intersection of the members' K".into());
    }

    let c = common_knowledge(sys, &g, e);
    let fix = everyone_knows(sys, &g, &e.and(&c, "ec"));
    if !c.same_points(&fix) {
        return Err("C is not a fixpoint of X -> E(e and X)".into());
    }
    // the E-chain is decreasing, so stop once it stabilizes
    let mut ek = eg;
    for depth in 1..=sys.num_points() {
        if !c.is_subset(&ek) {
            return Err(format!("C exceeds E^{depth}"));
        }
        let next = everyone_knows(sys, &g, &ek);
        if next.same_points(&ek) {
            break;
        }
        ek = next;
    }

    Ok(())
}
