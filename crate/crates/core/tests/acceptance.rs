//! The acceptance gate. Ten end-to-end checks across the whole stack, one
//! printed pass/fail line each; run with --nocapture to see them all.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use runsys::byzantine::{
    check_agreement, check_simultaneity, check_validity, find_disagreement,
    lower_bound_experiment, replay_witness, run_agreement, DecisionRule, FailureKind, FailureModel,
};
use runsys::coord::{
    all_delivered_run, delivered_event, messenger_system, sent_event, AttackRule,
    MessengerScenario,
};
use runsys::engine::GenOptions;
use runsys::epistemics::{common_knowledge, knowledge_depth, knows, AgentGroup};
use runsys::games::{
    build_state_space_system, event_at_node, event_profile, forgetful_strategy_bb,
    forgetful_strategy_f, forgetful_strategy_f_prime, forgetful_tree, imperfect_recall_system,
    p1_strategy, p2_strategy, simulate_play, state_point, two_stage_normal_form,
    two_stage_state_space, two_stage_tree, ForgetfulPayoffs, SwitchPlan,
};
use runsys::runner::{run_scenario, RunFlags};
use runsys::scenario::load_scenario;
use runsys::{AgentId, Point, System};

fn verdict(idx: usize, pass: bool, name: &str) {
    println!("[{idx:>2}] {} {name}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {idx} failed: {name}");
}

#[test]
fn c01_payoff_table_and_tree_agree() {
    let g = two_stage_normal_form();
    let t = two_stage_tree();
    let nature = BTreeMap::new();
    let mut ok = true;
    for p1 in ["aa", "ad", "da", "dd"] {
        for p2 in ["A", "D"] {
            let strats = [p1_strategy(p1).unwrap(), p2_strategy(p2).unwrap()];
            let out = simulate_play(&t, &strats, &nature).unwrap();
            let (u1, u2) = g.payoff(p1, p2).unwrap();
            ok &= out.payoffs == vec![u1, u2];
        }
    }
    ok &= g.payoff("aa", "A").unwrap() == (3, 3);
    ok &= g.payoff("da", "D").unwrap() == (1, 3);
    verdict(1, ok, "payoff table and staged tree agree on all eight profiles");
}

#[test]
fn c02_partition_model_knowledge() {
    let m = two_stage_state_space();
    let sys = build_state_space_system(&m).unwrap();
    let e = event_profile(&sys, &["aa", "A"]);
    let k2 = knows(&sys, AgentId::new(2), &e);
    let at = |label: &str| state_point(&sys, label).unwrap();
    let ok = k2.holds_at(&sys, at("w5")).unwrap()
        && !k2.holds_at(&sys, at("w1")).unwrap()
        && sys
            .indistinguishable(at("w3"), at("w4"), AgentId::new(1))
            .unwrap();
    verdict(2, ok, "five-state model: profile known at w5, not at w1, and w3 ~1 w4");
}

#[test]
fn c03_depth_tracks_delivered_transits() {
    let mut ok = true;
    for k in 1..=4usize {
        let sc = MessengerScenario {
            max_transits: k,
            horizon: 6,
            reliable: false,
            attack_rule: AttackRule::Never,
            payoffs: None,
        };
        let sys = messenger_system(&sc, GenOptions::default()).unwrap();
        let run = all_delivered_run(&sys, k).expect("all-delivered run");
        let p = Point::new(run, sys.horizon());
        let e = sent_event(&sys);
        let d = knowledge_depth(&sys, &AgentGroup::everyone(2), &e, p, k + 1).unwrap();
        ok &= d == k as i64;
    }
    verdict(3, ok, "k delivered transits give exactly depth-k knowledge of the send");
}

#[test]
fn c04_no_common_knowledge_from_lossy_transits() {
    let mut ok = true;
    for k in 1..=4usize {
        let sc = MessengerScenario {
            max_transits: k,
            horizon: 6,
            reliable: false,
            attack_rule: AttackRule::Never,
            payoffs: None,
        };
        let sys = messenger_system(&sc, GenOptions::default()).unwrap();
        let ck = common_knowledge(&sys, &AgentGroup::everyone(2), &delivered_event(&sys));
        ok &= ck.is_empty();
    }
    let reliable = MessengerScenario {
        max_transits: 2,
        horizon: 6,
        reliable: true,
        attack_rule: AttackRule::Never,
        payoffs: None,
    };
    let sys = messenger_system(&reliable, GenOptions::default()).unwrap();
    ok &= !common_knowledge(&sys, &AgentGroup::everyone(2), &delivered_event(&sys)).is_empty();
    verdict(4, ok, "lossy transits never yield common knowledge; reliable ones do");
}

#[test]
fn c05_crash_sweep_clean() {
    let start = Instant::now();
    let mut ok = true;
    for (n, t) in [(3, 0), (3, 1), (4, 0), (4, 1)] {
        let fm = FailureModel::new(FailureKind::Crash, n, t).unwrap();
        let sys = run_agreement(
            &fm,
            DecisionRule::AnyAttack,
            fm.rounds(),
            3,
            GenOptions::default(),
        )
        .unwrap();
        ok &= check_agreement(&sys).clean();
        ok &= check_validity(&sys).clean();
        let si = check_simultaneity(&sys);
        ok &= si.clean() && si.decision_rounds == BTreeSet::from([t + 1]);
    }
    ok &= start.elapsed().as_secs() < 60;
    verdict(5, ok, "crash n=3,4 t=0,1: agreement, validity, simultaneity at round t+1");
}

#[test]
fn c06_byzantine_disagreement_replays() {
    let fm = FailureModel::new(FailureKind::Byzantine, 3, 1).unwrap();
    let sys = run_agreement(
        &fm,
        DecisionRule::AnyAttack,
        fm.rounds(),
        3,
        GenOptions::default(),
    )
    .unwrap();
    let ok = match find_disagreement(&sys, fm.rounds()).unwrap() {
        Some(w) => replay_witness(&fm, DecisionRule::AnyAttack, &w, 3)
            .unwrap()
            .disagrees(),
        None => false,
    };
    verdict(6, ok, "n=3 t=1 Byzantine: a disagreement witness exists and replays");
}

#[test]
fn c07_simultaneity_needs_all_rounds() {
    let rep = lower_bound_experiment(4, 1, GenOptions::default()).unwrap();
    let ok = !rep.ck_by_time[1].1 && rep.ck_by_time[2].1 && rep.fault_id_ok();
    verdict(
        7,
        ok,
        "n=4 t=1: nonfaulty common knowledge absent after round 1, present after round 2",
    );
}

#[test]
fn c08_epistemic_laws_on_seeded_systems() {
    let mut ok = true;
    let mut rng = common::Rng::new(0x5EED);
    for i in 0..120 {
        let sys = common::random_system(&mut rng);
        let e = common::random_event(&sys, &mut rng, "e");
        let f = common::random_event(&sys, &mut rng, "f");
        if let Err(msg) = common::check_epistemic_laws(&sys, &e, &f) {
            eprintln!("system {i}: {msg}");
            ok = false;
        }
    }
    let mut r1 = common::Rng::new(7);
    let mut r2 = common::Rng::new(7);
    for _ in 0..5 {
        ok &= common::random_system(&mut r1).runs() == common::random_system(&mut r2).runs();
    }
    verdict(8, ok, "all epistemic laws hold on 120 seeded random systems");
}

fn single_point(sys: &System, label: &str) -> Point {
    let pts = event_at_node(sys, label).points(sys);
    assert_eq!(pts.len(), 1, "expected one {label} point");
    pts[0]
}

#[test]
fn c09_forgetting_versus_awareness() {
    let t = forgetful_tree(&ForgetfulPayoffs::default());

    let plain = imperfect_recall_system(&t, &forgetful_strategy_bb(), None, false).unwrap();
    let x3 = single_point(&plain, "x3");
    let x4 = single_point(&plain, "x4");
    let mut ok = plain.indistinguishable(x3, x4, AgentId::new(1)).unwrap();
    ok &= knows(&plain, AgentId::new(1), &event_at_node(&plain, "x3")).is_empty();

    let plan = SwitchPlan::new("x1", forgetful_strategy_f_prime());
    let sw = imperfect_recall_system(&t, &forgetful_strategy_f(), Some(&plan), true).unwrap();
    let e3 = event_at_node(&sw, "x3");
    let e4 = event_at_node(&sw, "x4");
    let k3 = knows(&sw, AgentId::new(1), &e3);
    let k4 = knows(&sw, AgentId::new(1), &e4);
    ok &= !k3.is_empty() && !k4.is_empty();
    ok &= k3.same_points(&e3) && k4.same_points(&e4);
    verdict(9, ok, "forgetful play merges x3 and x4; a switch-aware agent tells them apart");
}

#[test]
fn c10_reports_are_byte_identical() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let files = [
        "two_generals.toml",
        "crash_agreement.toml",
        "byzantine_split.toml",
        "lower_bound.toml",
        "state_space_demo.toml",
        "imperfect_recall.toml",
        "custom_minimal.toml",
    ];
    let mut ok = true;
    for f in files {
        let cfg = load_scenario(&dir.join(f)).unwrap();
        let body = |workers: usize| {
            let flags = RunFlags {
                workers: Some(workers),
                ..RunFlags::default()
            };
            run_scenario(&cfg, &flags).unwrap().report.body()
        };
        let first = body(1);
        ok &= first == body(1) && first == body(4);
    }
    verdict(10, ok, "report bodies are byte-identical across repeats and worker counts");
}
