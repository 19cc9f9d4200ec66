//! Property tests over arbitrary small systems: the partition laws of the
//! knowledge operators, canonical run ordering, and the agreement between
//! `knowledge_depth` and the iterated-E chain it summarizes.

mod common;

use std::sync::Arc;

use proptest::prelude::*;
use runsys::epistemics::{everyone_knows, knowledge_depth, AgentGroup};
use runsys::{Event, GlobalState, LocalState, Run, System, Value};

const SYMS: [&str; 3] = ["red", "green", "blue"];

fn build_runs(raw: Vec<Vec<(usize, Vec<usize>)>>) -> Vec<Run> {
    raw.into_iter()
        .map(|states| {
            let states = states
                .into_iter()
                .map(|(env, locals)| {
                    GlobalState::new(
                        Value::sym(SYMS[env]),
                        locals
                            .into_iter()
                            .map(|i| LocalState::from(Value::sym(SYMS[i])))
                            .collect(),
                    )
                })
                .collect();
            Run::new(states).expect("nonempty run")
        })
        .collect()
}

fn arb_raw_runs() -> impl Strategy<Value = Vec<Vec<(usize, Vec<usize>)>>> {
    (1usize..=3, 0usize..=4).prop_flat_map(|(n, h)| {
        let state = (0usize..3, prop::collection::vec(0usize..3, n));
        let run = prop::collection::vec(state, h + 1..h + 2);
        prop::collection::vec(run, 1..=6)
    })
}

fn arb_case() -> impl Strategy<Value = (Arc<System>, Vec<bool>, Vec<bool>)> {
    arb_raw_runs()
        .prop_map(|raw| Arc::new(System::new(build_runs(raw)).expect("valid system")))
        .prop_flat_map(|sys| {
            let np = sys.num_points();
            let mask = prop::collection::vec(any::<bool>(), np..np + 1);
            (Just(sys), mask.clone(), mask)
        })
}

fn mask_event(sys: &System, mask: &[bool], name: &str) -> Event {
    Event::from_fn(sys, name, |s, p| mask[s.point_id(p).expect("live point")])
}

proptest! {
    #[test]
    fn epistemic_laws_hold(case in arb_case()) {
        let (sys, me, mf) = case;
        let e = mask_event(&sys, &me, "e");
        let f = mask_event(&sys, &mf, "f");
        if let Err(msg) = common::check_epistemic_laws(&sys, &e, &f) {
            prop_assert!(false, "{msg}");
        }
    }

    #[test]
    fn run_order_is_canonical(raw in arb_raw_runs(), rot in 0usize..6) {
        let runs = build_runs(raw);
        let a = System::new(runs.clone()).expect("valid system");
        let mut shuffled = runs;
        let rot = rot % shuffled.len().max(1);
        shuffled.rotate_left(rot);
        let b = System::new(shuffled).expect("valid system");
        prop_assert_eq!(a.runs(), b.runs());
    }

    #[test]
    fn depth_matches_iterated_e(case in arb_case()) {
        let (sys, me, _) = case;
        let e = mask_event(&sys, &me, "e");
        let g = AgentGroup::everyone(sys.n());
        let mut chain = vec![e.clone()];
        for _ in 0..3 {
            let next = everyone_knows(&sys, &g, chain.last().expect("nonempty"));
            chain.push(next);
        }
        for p in sys.points() {
            let d = knowledge_depth(&sys, &g, &e, p, 3).expect("in range");
            if !e.holds_at(&sys, p).expect("in range") {
                prop_assert_eq!(d, -1);
                continue;
            }
            let expected = (1..=3)
                .take_while(|&k| chain[k].holds_at(&sys, p).expect("in range"))
                .count() as i64;
            prop_assert_eq!(d, expected);
        }
    }
}
