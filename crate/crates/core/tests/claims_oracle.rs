//! Independent oracle for the relay protocol's claim trees. An entry
//! [i1, .., ik] in agent j's tree is exactly a successful delivery chain:
//! i1's round-1 message reached i2, i2's round-2 relay reached i3, and so
//! on until ik's round-k relay reached j while j was still merging. The
//! oracle evaluates that chain predicate directly from the adversary
//! schedule and is compared against every local state of the generated
//! systems, for the crash and omission models at n = 3, t = 1.

use std::collections::BTreeMap;

use runsys::byzantine::{
    run_agreement, schedule_of_run, AdversarySchedule, DecisionRule, FailureKind, FailureModel,
    FaultBehavior,
};
use runsys::claims::{ClaimTree, Pref};
use runsys::engine::GenOptions;
use runsys::AgentId;

fn crash_round(sched: &AdversarySchedule, z: AgentId) -> Option<usize> {
    match sched.faults.get(&z) {
        Some(FaultBehavior::Crash { round, .. }) => Some(*round),
        _ => None,
    }
}

/// Does z's round-r message reach rcv?
fn send_ok(sched: &AdversarySchedule, z: AgentId, r: usize, rcv: AgentId) -> bool {
    match sched.faults.get(&z) {
        None => true,
        Some(FaultBehavior::Crash { round, deliver_to }) => {
            if r < *round {
                true
            } else if r == *round {
                deliver_to.contains(&rcv)
            } else {
                false
            }
        }
        Some(FaultBehavior::Omission { omit }) => !omit[r - 1].contains(&rcv),
        Some(FaultBehavior::Byzantine { .. }) => {
            unreachable!("the oracle covers crash and omission schedules only")
        }
    }
}

/// Agent j's claim tree at the end of round `time`, as path -> value.
/// Hop m of a chain happens in round m; a crashed j stops merging at its
/// crash round, which caps the chain lengths that can still land.
fn oracle_tree(
    n: usize,
    rounds: usize,
    prefs: &[Pref],
    sched: &AdversarySchedule,
    j: AgentId,
    time: usize,
) -> BTreeMap<Vec<usize>, Pref> {
    let cap = time.min(rounds);
    let mut out = BTreeMap::new();
    out.insert(Vec::new(), prefs[j.index()]);

    let mut chains: Vec<Vec<AgentId>> = vec![Vec::new()];
    for len in 1..=cap {
        let mut next = Vec::new();
        for chain in &chains {
            for z in AgentId::all(n) {
                if chain.contains(&z) {
                    continue;
                }
                let mut c = chain.clone();
                c.push(z);
                next.push(c);
            }
        }
        for chain in &next {
            let mut ok = crash_round(sched, j).map_or(true, |cr| cr > len);
            for m in 1..=len {
                let rcv = if m == len { j } else { chain[m] };
                if !send_ok(sched, chain[m - 1], m, rcv) {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.insert(
                    chain.iter().map(|a| a.get()).collect(),
                    prefs[chain[0].index()],
                );
            }
        }
        chains = next;
    }
    out
}

fn check_model(kind: FailureKind) {
    let n = 3;
    let fm = FailureModel::new(kind, n, 1).unwrap();
    let rounds = fm.rounds();
    // one idle round past the decision confirms trees freeze afterwards
    let horizon = rounds + 1;
    let sys = run_agreement(
        &fm,
        DecisionRule::AnyAttack,
        horizon,
        3,
        GenOptions::default(),
    )
    .unwrap();

    let mut entries = 0usize;
    for (ri, run) in sys.runs().iter().enumerate() {
        let (prefs, sched) = schedule_of_run(run, rounds).unwrap();
        for time in 0..=sys.horizon() {
            for j in AgentId::all(n) {
                let local = run.local_state_at(j, time).unwrap();
                let tree = ClaimTree::from_value(local.at("tree").unwrap()).unwrap();
                let got: BTreeMap<Vec<usize>, Pref> = tree
                    .iter()
                    .map(|(p, v)| (p.agents().iter().map(|a| a.get()).collect(), v))
                    .collect();
                let want = oracle_tree(n, rounds, &prefs, &sched, j, time);
                assert_eq!(
                    got,
                    want,
                    "run {ri} time {time} agent {j} under {}",
                    sched.label()
                );
                entries += got.len();

                if time == rounds && crash_round(&sched, j).map_or(true, |cr| cr > rounds) {
                    let decided = local.at("decided").and_then(|v| v.as_sym());
                    let expect = if want.values().any(|&v| v == Pref::Attack) {
                        "attack"
                    } else {
                        "retreat"
                    };
                    assert_eq!(
                        decided,
                        Some(expect),
                        "decision of agent {j} in run {ri} under {}",
                        sched.label()
                    );
                }
            }
        }
    }
    assert!(entries > 1000, "oracle exercised only {entries} entries");
}

#[test]
fn crash_trees_match_the_chain_oracle() {
    check_model(FailureKind::Crash);
}

#[test]
fn omission_trees_match_the_chain_oracle() {
    check_model(FailureKind::Omission);
}
