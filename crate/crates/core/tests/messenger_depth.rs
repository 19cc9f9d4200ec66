//! The messenger chain: every delivered transit adds exactly one level of
//! interactive knowledge about the original send, and no number of lossy
//! transits ever produces common knowledge of delivery.

use runsys::coord::{
    all_delivered_run, delivered_event, messenger_system, sent_event, AttackRule,
    MessengerScenario,
};
use runsys::engine::GenOptions;
use runsys::epistemics::{common_knowledge, knowledge_depth, AgentGroup};
use runsys::Point;

fn scenario(transits: usize, reliable: bool) -> MessengerScenario {
    MessengerScenario {
        max_transits: transits,
        horizon: 6,
        reliable,
        attack_rule: AttackRule::Never,
        payoffs: None,
    }
}

#[test]
fn each_delivered_transit_adds_one_level_of_depth() {
    for k in 1..=4usize {
        let sys = messenger_system(&scenario(k, false), GenOptions::default()).unwrap();
        let run = all_delivered_run(&sys, k).expect("a run delivering every transit");
        let p = Point::new(run, sys.horizon());
        let e = sent_event(&sys);
        let depth = knowledge_depth(&sys, &AgentGroup::everyone(2), &e, p, k + 1).unwrap();
        assert_eq!(depth, k as i64, "after {k} deliveries");
    }
}

#[test]
fn lossy_delivery_never_becomes_common_knowledge() {
    for k in 1..=4usize {
        let sys = messenger_system(&scenario(k, false), GenOptions::default()).unwrap();
        let ck = common_knowledge(&sys, &AgentGroup::everyone(2), &delivered_event(&sys));
        assert!(ck.is_empty(), "CK of delivery nonempty with {k} transits");
    }
}

#[test]
fn reliable_delivery_restores_common_knowledge() {
    let sys = messenger_system(&scenario(2, true), GenOptions::default()).unwrap();
    let ck = common_knowledge(&sys, &AgentGroup::everyone(2), &delivered_event(&sys));
    assert!(!ck.is_empty());
}
