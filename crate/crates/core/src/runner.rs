//! Scenario execution: build the suite's system, name its events,
//! evaluate the queries and suite checks, and assemble the report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::byzantine::{
    check_agreement, check_simultaneity, check_validity, find_disagreement,
    lower_bound_experiment, replay_witness, run_agreement, schedule_of_run, DecisionRule,
    FailureKind, FailureModel, DEFAULT_CLAIM_BOUND,
};
use crate::coord::{messenger_system, AttackRule, MessengerScenario};
use crate::engine::{GenOptions, DEFAULT_STATE_BUDGET};
use crate::epistemics::{
    common_knowledge, everyone_knows, knows, nonfaulty_common_knowledge, AgentGroup,
};
use crate::error::{Error, Result};
use crate::event::Event;
use crate::games::{
    build_state_space_system, forgetful_strategy_bb, forgetful_strategy_f,
    forgetful_strategy_f_prime, forgetful_tree, imperfect_recall_system, two_stage_state_space,
    ForgetfulPayoffs, Strategy, SwitchPlan,
};
use crate::report::Report;
use crate::scenario::{
    value_from_toml, ByzantineParams, EventDef, GroupSpec, Predicate, QueryExpr, ScenarioConfig,
    SuiteKind,
};
use crate::state::{AgentId, GlobalState, LocalState, Point, Run};
use crate::system::{dot_graph, System};

/// Command-line overrides layered on top of a config.
#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    pub budget: Option<usize>,
    pub workers: Option<usize>,
    /// Assert the run uses no randomness. Generation and evaluation are
    /// deterministic by construction, so this is a recorded promise, not
    /// a switch.
    pub seedless: bool,
    pub report_to: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub report: Report,
    pub pass: bool,
    pub report_path: Option<PathBuf>,
}

pub fn list_suites() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "coord-attack",
            "two generals and a messenger over a lossy channel",
        ),
        (
            "byzantine",
            "synchronous full-information agreement under crash, omission, or byzantine faults",
        ),
        (
            "game",
            "two-stage game knowledge models and the forgetful imperfect-recall tree",
        ),
        ("custom", "explicit runs written out state by state"),
    ]
}

struct Check {
    name: String,
    pass: bool,
    detail: Vec<String>,
}

struct Built {
    sys: Option<System>,
    echo: Vec<(String, String)>,
    checks: Vec<Check>,
    /// Preformatted experiment block, when the suite ran one instead of
    /// producing a queryable system.
    experiment: Option<String>,
    /// Failure-model context for schedule-labelled witnesses.
    byz: Option<(FailureModel, DecisionRule, usize)>,
}

fn effective_options(cfg: &ScenarioConfig, flags: &RunFlags) -> GenOptions {
    GenOptions {
        budget: flags
            .budget
            .or(cfg.limits.budget)
            .unwrap_or(DEFAULT_STATE_BUDGET),
        workers: flags.workers.or(cfg.limits.workers).unwrap_or(1),
    }
}

fn strategy_by_name(name: &str) -> Result<Strategy> {
    match name {
        "f" => Ok(forgetful_strategy_f()),
        "f-prime" | "f'" => Ok(forgetful_strategy_f_prime()),
        "bb" => Ok(forgetful_strategy_bb()),
        other => Err(Error::Scenario(format!(
            "unknown strategy {other}; use f, f-prime, or bb"
        ))),
    }
}

fn byzantine_model(p: &ByzantineParams) -> Result<(FailureModel, DecisionRule, usize)> {
    let kind: FailureKind = p.failures.parse()?;
    let fm = FailureModel::new(kind, p.n, p.t)?;
    let rule: DecisionRule = p.rule.parse()?;
    Ok((fm, rule, p.claim_bound.unwrap_or(DEFAULT_CLAIM_BOUND)))
}

fn build_suite(cfg: &ScenarioConfig, opts: GenOptions) -> Result<Built> {
    match cfg.suite {
        SuiteKind::CoordAttack => {
            let p = cfg.coord_attack.clone().unwrap_or_default();
            let rule: AttackRule = p.attack_rule.as_deref().unwrap_or("never").parse()?;
            let sc = MessengerScenario {
                max_transits: p.transits,
                horizon: p.horizon.unwrap_or(p.transits + 2),
                reliable: p.reliable,
                attack_rule: rule,
                payoffs: None,
            };
            let sys = messenger_system(&sc, opts)?;
            Ok(Built {
                sys: Some(sys),
                echo: vec![
                    ("transits".into(), sc.max_transits.to_string()),
                    ("horizon".into(), sc.horizon.to_string()),
                    ("reliable".into(), sc.reliable.to_string()),
                    ("attack-rule".into(), rule.to_string()),
                ],
                checks: Vec::new(),
                experiment: None,
                byz: None,
            })
        }
        SuiteKind::Byzantine => {
            let p = cfg.byzantine.as_ref().expect("validated");
            let (fm, rule, claim_bound) = byzantine_model(p)?;
            let mut echo = vec![
                ("n".into(), fm.n.to_string()),
                ("t".into(), fm.t.to_string()),
                ("failures".into(), fm.kind.to_string()),
                ("rule".into(), rule.to_string()),
                ("claim-bound".into(), claim_bound.to_string()),
            ];
            if let Some(exp) = &p.experiment {
                if fm.kind != FailureKind::Crash {
                    return Err(Error::Scenario(
                        "the lower-bound experiment runs on the crash model".into(),
                    ));
                }
                echo.push(("experiment".into(), exp.clone()));
                let rep = lower_bound_experiment(fm.n, fm.t, opts)?;
                let mut checks = vec![
                    Check {
                        name: "nonfaulty-ck-absent-at-round-1".into(),
                        pass: !rep.ck_by_time[1].1,
                        detail: Vec::new(),
                    },
                    Check {
                        name: format!("nonfaulty-ck-holds-at-round-{}", rep.rounds),
                        pass: rep.ck_by_time[rep.rounds].1,
                        detail: Vec::new(),
                    },
                ];
                if fm.t >= 1 {
                    checks.push(Check {
                        name: "silent-crasher-identified-after-round-1".into(),
                        pass: rep.fault_id_ok(),
                        detail: Vec::new(),
                    });
                }
                return Ok(Built {
                    sys: None,
                    echo,
                    checks,
                    experiment: Some(rep.to_string()),
                    byz: Some((fm, rule, claim_bound)),
                });
            }
            let horizon = p.horizon.unwrap_or(fm.rounds());
            echo.push(("horizon".into(), horizon.to_string()));
            let sys = run_agreement(&fm, rule, horizon, claim_bound, opts)?;
            let checks = if p.checks {
                byzantine_checks(&sys, &fm, rule, claim_bound)?
            } else {
                Vec::new()
            };
            Ok(Built {
                sys: Some(sys),
                echo,
                checks,
                experiment: None,
                byz: Some((fm, rule, claim_bound)),
            })
        }
        SuiteKind::Game => {
            let p = cfg.game.as_ref().expect("validated");
            let (sys, mut echo) = match p.model.as_str() {
                "state-space" => (
                    build_state_space_system(&two_stage_state_space())?,
                    Vec::new(),
                ),
                "imperfect-recall" => {
                    let tree = forgetful_tree(&ForgetfulPayoffs::default());
                    let base = strategy_by_name(p.base.as_deref().unwrap_or("f"))?;
                    let plan = match (&p.switch_at, &p.switch_to) {
                        (Some(at), Some(to)) => {
                            Some(SwitchPlan::new(at, strategy_by_name(to)?))
                        }
                        _ => None,
                    };
                    let mut echo = vec![
                        ("base".into(), base.name.clone()),
                        ("switch-aware".into(), p.switch_aware.to_string()),
                    ];
                    if let Some(plan) = &plan {
                        echo.push(("switch-at".into(), plan.at.clone()));
                        echo.push(("switch-to".into(), plan.to.name.clone()));
                    }
                    (
                        imperfect_recall_system(&tree, &base, plan.as_ref(), p.switch_aware)?,
                        echo,
                    )
                }
                _ => unreachable!("validated"),
            };
            echo.insert(0, ("model".into(), p.model.clone()));
            Ok(Built {
                sys: Some(sys),
                echo,
                checks: Vec::new(),
                experiment: None,
                byz: None,
            })
        }
        SuiteKind::Custom => {
            let p = cfg.custom.as_ref().expect("validated");
            let runs = p
                .runs
                .iter()
                .map(|r| {
                    let states = r
                        .states
                        .iter()
                        .map(|st| {
                            let env = value_from_toml(&st.env)?;
                            let locals = st
                                .locals
                                .iter()
                                .map(|l| Ok(LocalState(value_from_toml(l)?)))
                                .collect::<Result<Vec<_>>>()?;
                            Ok(GlobalState::new(env, locals))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Run::new(states)
                })
                .collect::<Result<Vec<_>>>()?;
            let sys = System::new(runs)?;
            Ok(Built {
                sys: Some(sys),
                echo: Vec::new(),
                checks: Vec::new(),
                experiment: None,
                byz: None,
            })
        }
    }
}

fn fmt_decisions(decisions: &[(AgentId, crate::claims::Pref)]) -> String {
    decisions
        .iter()
        .map(|(a, p)| format!("a{a}={p}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn byzantine_checks(
    sys: &System,
    fm: &FailureModel,
    rule: DecisionRule,
    claim_bound: usize,
) -> Result<Vec<Check>> {
    let rounds = fm.rounds();
    let mut out = Vec::new();

    let ag = check_agreement(sys);
    let mut detail = Vec::new();
    if !ag.clean() {
        detail.push(format!(
            "violations: {}, undecided: {}",
            ag.violations.len(),
            ag.undecided.len()
        ));
        if let Some(w) = find_disagreement(sys, rounds)? {
            detail.push(format!("witness run: {}", w.run));
            detail.push(format!(
                "witness prefs: {}",
                w.prefs.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
            ));
            detail.push(format!("witness schedule: {}", w.schedule.label()));
            detail.push(format!("witness decisions: {}", fmt_decisions(&w.decisions)));
            let replay = replay_witness(fm, rule, &w, claim_bound)?;
            detail.push(format!("replay disagrees: {}", replay.disagrees()));
        }
    }
    out.push(Check {
        name: "agreement".into(),
        pass: ag.clean(),
        detail,
    });

    let va = check_validity(sys);
    let mut detail = vec![format!("unanimous failure-free runs: {}", va.covered)];
    for v in va.violations.iter().take(3) {
        let (prefs, schedule) = schedule_of_run(&sys.runs()[v.run], rounds)?;
        detail.push(format!(
            "witness run {}: unanimous {} not honored (prefs {}, schedule {})",
            v.run,
            v.unanimous,
            prefs.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
            schedule.label()
        ));
    }
    out.push(Check {
        name: "validity".into(),
        pass: va.clean(),
        detail,
    });

    let si = check_simultaneity(sys);
    let rounds_seen = si
        .decision_rounds
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut detail = vec![format!("decision rounds: {{{rounds_seen}}}")];
    for v in si.violations.iter().take(3) {
        let times = v
            .decision_times
            .iter()
            .map(|(a, t)| format!("a{a}@{t}"))
            .collect::<Vec<_>>()
            .join(" ");
        let (_, schedule) = schedule_of_run(&sys.runs()[v.run], rounds)?;
        detail.push(format!(
            "witness run {}: {} (schedule {})",
            v.run,
            times,
            schedule.label()
        ));
    }
    out.push(Check {
        name: "simultaneity".into(),
        pass: si.clean(),
        detail,
    });

    Ok(out)
}

// ---- events ----------------------------------------------------------------

fn builtin_events(suite: SuiteKind, sys: &System) -> BTreeMap<String, Event> {
    let mut out = BTreeMap::new();
    match suite {
        SuiteKind::CoordAttack => {
            out.insert("sent".into(), crate::coord::sent_event(sys));
            out.insert("delivered".into(), crate::coord::delivered_event(sys));
            out.insert("attack".into(), crate::coord::attack_event(sys));
            out.insert(
                "one-sided-attack".into(),
                crate::coord::one_sided_attack_event(sys),
            );
        }
        SuiteKind::Byzantine => {
            out.insert("some-attack".into(), crate::byzantine::event_some_attack(sys));
        }
        SuiteKind::Game | SuiteKind::Custom => {}
    }
    out
}

fn atom_event(sys: &System, name: &str, p: &Predicate) -> Result<Event> {
    let env_scope = p.scope.as_deref().unwrap_or("env") == "env";
    let agent = match (env_scope, p.agent) {
        (true, _) => None,
        (false, Some(a)) => {
            if a > sys.n() {
                return Err(Error::Scenario(format!(
                    "predicate agent {a} out of range; the system has {} agents",
                    sys.n()
                )));
            }
            Some(AgentId::new(a))
        }
        (false, None) => unreachable!("validated"),
    };
    let path = p.path.clone().expect("validated");
    let op = p.op.clone().expect("validated");
    let want = p.value.as_ref().map(value_from_toml).transpose()?;
    Ok(Event::from_fn(sys, name, move |s, pt| {
        let g = match s.global_state(pt) {
            Ok(g) => g,
            Err(_) => return false,
        };
        let root: &LocalState = match agent {
            None => &g.env,
            Some(a) => match g.local(a) {
                Ok(l) => l,
                Err(_) => return false,
            },
        };
        let v = root.at(&path);
        match op.as_str() {
            "exists" => v.is_some(),
            "eq" => v == want.as_ref(),
            "ne" => v != want.as_ref(),
            "contains" => v.map_or(false, |x| x.contains(want.as_ref().expect("validated"))),
            _ => unreachable!("validated"),
        }
    }))
}

fn predicate_event(sys: &System, name: &str, p: &Predicate) -> Result<Event> {
    if p.op.is_some() {
        return atom_event(sys, name, p);
    }
    if !p.all.is_empty() {
        let mut acc = Event::full(sys, name);
        for sub in &p.all {
            acc = acc.and(&predicate_event(sys, name, sub)?, name);
        }
        return Ok(acc);
    }
    if !p.any.is_empty() {
        let mut acc = Event::empty(sys, name);
        for sub in &p.any {
            acc = acc.or(&predicate_event(sys, name, sub)?, name);
        }
        return Ok(acc);
    }
    let sub = p.not.as_ref().expect("validated");
    Ok(predicate_event(sys, name, sub)?.not(name))
}

fn named_events(
    suite: SuiteKind,
    sys: &System,
    defs: &[EventDef],
) -> Result<BTreeMap<String, Event>> {
    let mut events = builtin_events(suite, sys);
    let builtin_names: Vec<String> = events.keys().cloned().collect();
    for def in defs {
        if builtin_names.contains(&def.name) {
            return Err(Error::Scenario(format!(
                "event name {} shadows a builtin; pick another name",
                def.name
            )));
        }
        let e = match (&def.builtin, &def.when) {
            (Some(b), None) => events
                .get(b)
                .cloned()
                .map(|e| e.rename(def.name.clone()))
                .ok_or_else(|| {
                    Error::Scenario(format!(
                        "unknown builtin event {b}; this suite offers: {}",
                        if builtin_names.is_empty() {
                            "none".to_string()
                        } else {
                            builtin_names.join(", ")
                        }
                    ))
                })?,
            (None, Some(p)) => predicate_event(sys, &def.name, p)?,
            _ => unreachable!("validated"),
        };
        events.insert(def.name.clone(), e);
    }
    Ok(events)
}

// ---- queries ---------------------------------------------------------------

fn agent_group(g: &GroupSpec, sys: &System) -> Result<AgentGroup> {
    match g {
        GroupSpec::All => Ok(AgentGroup::everyone(sys.n())),
        GroupSpec::Agents(ids) => {
            for &i in ids {
                if i > sys.n() {
                    return Err(Error::Scenario(format!(
                        "agent {i} out of range; the system has {} agents",
                        sys.n()
                    )));
                }
            }
            Ok(AgentGroup::fixed(ids.iter().copied()))
        }
    }
}

fn eval_query(
    sys: &System,
    events: &BTreeMap<String, Event>,
    q: &QueryExpr,
) -> Result<Event> {
    match q {
        QueryExpr::Name(n) => events.get(n).cloned().ok_or_else(|| {
            Error::Scenario(format!(
                "unknown event {n}; define it with [[event]] or use a builtin"
            ))
        }),
        QueryExpr::Knows(i, sub) => {
            if *i > sys.n() {
                return Err(Error::Scenario(format!(
                    "agent {i} out of range; the system has {} agents",
                    sys.n()
                )));
            }
            Ok(knows(sys, AgentId::new(*i), &eval_query(sys, events, sub)?))
        }
        QueryExpr::Everyone(g, sub) => Ok(everyone_knows(
            sys,
            &agent_group(g, sys)?,
            &eval_query(sys, events, sub)?,
        )),
        QueryExpr::Common(g, sub) => Ok(common_knowledge(
            sys,
            &agent_group(g, sys)?,
            &eval_query(sys, events, sub)?,
        )),
        QueryExpr::NonfaultyCommon(sub) => {
            nonfaulty_common_knowledge(sys, &eval_query(sys, events, sub)?)
        }
    }
}

/// A point reference a reader can chase back into the system, with the
/// run's schedule attached when the suite has one.
fn witness_note(sys: &System, p: Point, byz: Option<&(FailureModel, DecisionRule, usize)>) -> String {
    match byz {
        Some((fm, _, _)) => match schedule_of_run(&sys.runs()[p.run], fm.rounds()) {
            Ok((prefs, schedule)) => format!(
                "witness: {p} (prefs {}, schedule {})",
                prefs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                schedule.label()
            ),
            Err(_) => format!("witness: {p}"),
        },
        None => format!("witness: {p} env={}", match sys.global_state(p) {
            Ok(g) => g.env.to_string(),
            Err(_) => "?".into(),
        }),
    }
}

struct QueryOutcome {
    label: String,
    lines: Vec<String>,
    verdict: Option<bool>,
}

fn run_queries(
    sys: &System,
    events: &BTreeMap<String, Event>,
    cfg: &ScenarioConfig,
    byz: Option<&(FailureModel, DecisionRule, usize)>,
) -> Result<Vec<QueryOutcome>> {
    let mut out = Vec::new();
    for (i, def) in cfg.query.iter().enumerate() {
        let expr = crate::scenario::parse_query(&def.expr)?;
        let canonical = expr.to_string();
        let label = def.name.clone().unwrap_or_else(|| format!("query-{}", i + 1));
        let e = eval_query(sys, events, &expr)?;
        let mut lines = vec![
            format!("expr: {canonical}"),
            format!("points: {} of {}", e.count(), sys.num_points()),
        ];
        let sample: Vec<Point> = e.points(sys).into_iter().take(3).collect();
        if !sample.is_empty() {
            lines.push(format!(
                "sample: {}",
                sample.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
            ));
        }
        let verdict = match def.expect.as_deref() {
            None => None,
            Some("empty") => {
                let pass = e.is_empty();
                if !pass {
                    for p in &sample {
                        lines.push(witness_note(sys, *p, byz));
                    }
                }
                Some(pass)
            }
            Some("nonempty") => Some(!e.is_empty()),
            Some("full") => {
                let pass = e.count() == sys.num_points();
                if !pass {
                    let missing = e.not("missing");
                    for p in missing.points(sys).into_iter().take(3) {
                        lines.push(witness_note(sys, p, byz));
                    }
                }
                Some(pass)
            }
            Some(kind @ ("holds" | "fails")) => {
                let p = Point::new(def.run.expect("validated"), def.time.expect("validated"));
                let value = e.holds_at(sys, p)?;
                lines.push(format!("at {p}: {value}"));
                let pass = value == (kind == "holds");
                if !pass {
                    lines.push(witness_note(sys, p, byz));
                }
                Some(pass)
            }
            Some(_) => unreachable!("validated"),
        };
        if let Some(expect) = &def.expect {
            lines.push(format!("expect: {expect}"));
            lines.push(format!(
                "verdict: {}",
                if verdict == Some(true) { "pass" } else { "fail" }
            ));
        }
        out.push(QueryOutcome {
            label,
            lines,
            verdict,
        });
    }
    Ok(out)
}

// ---- entry points ----------------------------------------------------------

pub fn run_scenario(cfg: &ScenarioConfig, flags: &RunFlags) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let opts = effective_options(cfg, flags);

    let built = build_suite(cfg, opts)?;

    let mut report = Report::new();
    report.heading("scenario");
    if let Some(name) = &cfg.name {
        report.kv("name", name);
    }
    report.kv("suite", cfg.suite);
    for (k, v) in &built.echo {
        report.kv(k, v);
    }
    report.kv("budget", opts.budget);

    let mut query_outcomes = Vec::new();
    if let Some(sys) = &built.sys {
        report.heading("system");
        report.kv("runs", sys.runs().len());
        report.kv("horizon", sys.horizon());
        report.kv("agents", sys.n());
        report.kv("points", sys.num_points());

        let events = named_events(cfg.suite, sys, &cfg.event)?;
        query_outcomes = run_queries(sys, &events, cfg, built.byz.as_ref())?;
        if !query_outcomes.is_empty() {
            report.heading("queries");
            for (i, q) in query_outcomes.iter().enumerate() {
                report.line(format!("[{}] {}", i + 1, q.label));
                for l in &q.lines {
                    report.line(format!("  {l}"));
                }
            }
        }
    }
    if let Some(block) = &built.experiment {
        report.heading("experiment");
        report.block(block);
    }

    if !built.checks.is_empty() {
        report.heading("checks");
        for c in &built.checks {
            report.kv(&c.name, if c.pass { "pass" } else { "fail" });
            for l in &c.detail {
                report.line(format!("  {l}"));
            }
        }
    }

    let checks_pass = built.checks.iter().filter(|c| c.pass).count();
    let queries_with_verdict = query_outcomes.iter().filter(|q| q.verdict.is_some()).count();
    let queries_pass = query_outcomes
        .iter()
        .filter(|q| q.verdict == Some(true))
        .count();
    let pass = checks_pass == built.checks.len() && queries_pass == queries_with_verdict;

    report.heading("verdict");
    report.kv("result", if pass { "pass" } else { "fail" });
    if !built.checks.is_empty() {
        report.kv("checks", format!("{checks_pass} of {} pass", built.checks.len()));
    }
    if queries_with_verdict > 0 {
        report.kv(
            "queries",
            format!("{queries_pass} of {queries_with_verdict} pass"),
        );
    }

    report.timing("wall-ms", start.elapsed().as_millis());
    report.timing("workers", opts.workers);
    if flags.seedless {
        report.timing("seedless", "asserted");
    }

    let report_path = flags
        .report_to
        .clone()
        .or_else(|| cfg.output.report.as_ref().map(PathBuf::from));
    if let Some(path) = &report_path {
        report.write_to(path)?;
    }

    Ok(ScenarioOutcome {
        report,
        pass,
        report_path,
    })
}

/// Build the scenario's system without running checks or queries. For
/// byzantine configs this ignores any experiment setting; the experiment
/// itself has no single exportable system.
pub fn build_system(cfg: &ScenarioConfig, flags: &RunFlags) -> Result<System> {
    cfg.validate()?;
    let opts = effective_options(cfg, flags);
    match cfg.suite {
        SuiteKind::Byzantine => {
            let p = cfg.byzantine.as_ref().expect("validated");
            let (fm, rule, claim_bound) = byzantine_model(p)?;
            run_agreement(&fm, rule, p.horizon.unwrap_or(fm.rounds()), claim_bound, opts)
        }
        _ => {
            let built = build_suite(cfg, opts)?;
            built.sys.ok_or_else(|| {
                Error::Internal("suite produced no system".into())
            })
        }
    }
}

pub fn export_graph(cfg: &ScenarioConfig, flags: &RunFlags, out: Option<&Path>) -> Result<PathBuf> {
    let sys = build_system(cfg, flags)?;
    let dot = dot_graph(&sys);
    let path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.graph.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            Error::Scenario("no graph output path; set [output].graph or pass --out".into())
        })?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Scenario(format!("create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(&path, dot)
        .map_err(|e| Error::Scenario(format!("write {}: {e}", path.display())))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn flags() -> RunFlags {
        RunFlags::default()
    }

    #[test]
    fn coord_scenario_passes_with_empty_ck() {
        let cfg = parse_scenario(
            "suite = \"coord-attack\"\n\
             [coord-attack]\ntransits = 2\n\
             [[query]]\nname = \"no-ck\"\nexpr = \"C({1,2}, delivered)\"\nexpect = \"empty\"\n\
             [[query]]\nname = \"somewhere-known\"\nexpr = \"K(2, delivered)\"\nexpect = \"nonempty\"\n",
        )
        .unwrap();
        let out = run_scenario(&cfg, &flags()).unwrap();
        assert!(out.pass, "{}", out.report.body());
        let body = out.report.body();
        assert!(body.contains("== queries =="), "{body}");
        assert!(body.contains("verdict: pass"), "{body}");
        assert!(!body.contains("wall-ms"), "timing leaked into the body");
    }

    #[test]
    fn byzantine_scenario_fails_with_replayable_witness() {
        let cfg = parse_scenario(
            "suite = \"byzantine\"\n[byzantine]\nn = 3\nt = 1\nfailures = \"byzantine\"\n",
        )
        .unwrap();
        let out = run_scenario(&cfg, &flags()).unwrap();
        assert!(!out.pass);
        let body = out.report.body();
        assert!(body.contains("agreement: fail"), "{body}");
        assert!(body.contains("witness schedule: byz("), "{body}");
        assert!(body.contains("replay disagrees: true"), "{body}");
    }

    #[test]
    fn crash_scenario_checks_stay_clean() {
        let cfg = parse_scenario(
            "suite = \"byzantine\"\n[byzantine]\nn = 3\nt = 1\n\
             [[query]]\nexpr = \"CN(some-attack)\"\nexpect = \"nonempty\"\n",
        )
        .unwrap();
        let out = run_scenario(&cfg, &flags()).unwrap();
        assert!(out.pass, "{}", out.report.body());
        let body = out.report.body();
        assert!(body.contains("agreement: pass"), "{body}");
        assert!(body.contains("simultaneity: pass"), "{body}");
    }

    #[test]
    fn reports_are_byte_identical_across_workers() {
        let cfg = parse_scenario(
            "suite = \"byzantine\"\n[byzantine]\nn = 3\nt = 1\n\
             [[query]]\nexpr = \"E(all, some-attack)\"\n",
        )
        .unwrap();
        let one = run_scenario(&cfg, &RunFlags { workers: Some(1), ..flags() }).unwrap();
        let four = run_scenario(&cfg, &RunFlags { workers: Some(4), ..flags() }).unwrap();
        assert_eq!(one.report.body(), four.report.body());
        let again = run_scenario(&cfg, &RunFlags { workers: Some(4), ..flags() }).unwrap();
        assert_eq!(four.report.body(), again.report.body());
    }

    #[test]
    fn custom_suite_builds_from_literal_states() {
        let cfg = parse_scenario(
            "suite = \"custom\"\n\
             [[custom.runs]]\n\
             states = [ { env = { coin = \"heads\" }, locals = [ { saw = \"heads\" }, { saw = \"none\" } ] } ]\n\
             [[custom.runs]]\n\
             states = [ { env = { coin = \"tails\" }, locals = [ { saw = \"tails\" }, { saw = \"none\" } ] } ]\n\
             [[event]]\nname = \"heads\"\nwhen = { path = \"coin\", op = \"eq\", value = \"heads\" }\n\
             [[query]]\nname = \"one-knows\"\nexpr = \"K(1, heads)\"\nexpect = \"holds\"\nrun = 0\ntime = 0\n\
             [[query]]\nname = \"two-does-not\"\nexpr = \"K(2, heads)\"\nexpect = \"empty\"\n",
        )
        .unwrap();
        let out = run_scenario(&cfg, &flags()).unwrap();
        assert!(out.pass, "{}", out.report.body());
    }

    #[test]
    fn lower_bound_experiment_reports_and_passes() {
        let cfg = parse_scenario(
            "suite = \"byzantine\"\n[byzantine]\nn = 3\nt = 1\nexperiment = \"lower-bound\"\n",
        )
        .unwrap();
        let out = run_scenario(&cfg, &flags()).unwrap();
        assert!(out.pass, "{}", out.report.body());
        let body = out.report.body();
        assert!(body.contains("== experiment =="), "{body}");
        assert!(body.contains("nonfaulty-ck-absent-at-round-1: pass"), "{body}");
        assert!(body.contains("end of round 2: common knowledge = true"), "{body}");
    }

    #[test]
    fn state_space_scenario_answers_profile_queries() {
        let cfg = parse_scenario(
            "suite = \"game\"\n[game]\nmodel = \"state-space\"\n\
             [[event]]\nname = \"profile-aa-A\"\nwhen = { path = \"profile\", op = \"eq\", value = [\"aa\", \"A\"] }\n\
             [[query]]\nname = \"known-at-w5\"\nexpr = \"K(2, profile-aa-A)\"\nexpect = \"nonempty\"\n",
        )
        .unwrap();
        let out = run_scenario(&cfg, &flags()).unwrap();
        assert!(out.pass, "{}", out.report.body());
    }

    #[test]
    fn unknown_event_in_query_is_a_scenario_error() {
        let cfg = parse_scenario(
            "suite = \"coord-attack\"\n[[query]]\nexpr = \"K(1, nonsense)\"\n",
        )
        .unwrap();
        let err = run_scenario(&cfg, &flags()).unwrap_err();
        assert!(matches!(err, Error::Scenario(_)), "{err}");
    }

    #[test]
    fn export_graph_writes_stable_dot() {
        let cfg = parse_scenario("suite = \"game\"\n[game]\nmodel = \"state-space\"\n").unwrap();
        let dir = std::env::temp_dir().join("runsys-test-graph");
        let path = dir.join("g.dot");
        let written = export_graph(&cfg, &flags(), Some(&path)).unwrap();
        let a = std::fs::read_to_string(&written).unwrap();
        export_graph(&cfg, &flags(), Some(&path)).unwrap();
        let b = std::fs::read_to_string(&written).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("graph indistinguishability"), "{a}");
        std::fs::remove_dir_all(&dir).ok();
    }
}
