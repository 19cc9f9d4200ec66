//! Declarative scenario files: which system to build, which events to
//! name inside it, and which knowledge queries to ask.
//!
//! Files are TOML with strict keys; anything unrecognized fails the load,
//! so typos surface before an expensive generation starts. State atoms
//! are symbols, integers, booleans, sequences, and records; floats and
//! datetimes are rejected because state equality must be exact.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    CoordAttack,
    Byzantine,
    Game,
    Custom,
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SuiteKind::CoordAttack => "coord-attack",
            SuiteKind::Byzantine => "byzantine",
            SuiteKind::Game => "game",
            SuiteKind::Custom => "custom",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub suite: SuiteKind,
    pub coord_attack: Option<CoordAttackParams>,
    pub byzantine: Option<ByzantineParams>,
    pub game: Option<GameParams>,
    pub custom: Option<CustomParams>,
    #[serde(default)]
    pub event: Vec<EventDef>,
    #[serde(default)]
    pub query: Vec<QueryDef>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CoordAttackParams {
    #[serde(default = "default_transits")]
    pub transits: usize,
    /// Defaults to transits + 2.
    pub horizon: Option<usize>,
    #[serde(default)]
    pub reliable: bool,
    /// never | send-receive | on-delivery.
    pub attack_rule: Option<String>,
}

fn default_transits() -> usize {
    crate::coord::DEFAULT_MAX_TRANSITS
}

impl Default for CoordAttackParams {
    fn default() -> Self {
        CoordAttackParams {
            transits: default_transits(),
            horizon: None,
            reliable: false,
            attack_rule: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ByzantineParams {
    pub n: usize,
    pub t: usize,
    /// crash | omission | byzantine.
    #[serde(default = "default_failures")]
    pub failures: String,
    /// Defaults to the decision round t + 1.
    pub horizon: Option<usize>,
    /// any-attack | always-retreat.
    #[serde(default = "default_rule")]
    pub rule: String,
    pub claim_bound: Option<usize>,
    /// Run the agreement, validity, and simultaneity checkers.
    #[serde(default = "default_true")]
    pub checks: bool,
    /// "lower-bound": trace when "someone preferred attack" becomes common
    /// knowledge among the nonfaulty, instead of building a queryable system.
    pub experiment: Option<String>,
}

fn default_failures() -> String {
    "crash".into()
}

fn default_rule() -> String {
    "any-attack".into()
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GameParams {
    /// state-space | imperfect-recall.
    pub model: String,
    /// Strategy names for the imperfect-recall model: f | f-prime | bb.
    pub base: Option<String>,
    pub switch_at: Option<String>,
    pub switch_to: Option<String>,
    #[serde(default)]
    pub switch_aware: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomParams {
    pub runs: Vec<CustomRun>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRun {
    pub states: Vec<CustomState>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomState {
    pub env: toml::Value,
    pub locals: Vec<toml::Value>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EventDef {
    pub name: String,
    /// Reference a suite-provided event by name.
    pub builtin: Option<String>,
    /// Or define one as a predicate over state atoms.
    pub when: Option<Predicate>,
}

/// A point predicate: either an atom testing one path inside the
/// environment or one agent's local state, or a combinator over
/// sub-predicates. Exactly one form per node.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Predicate {
    /// env (default) | agent.
    pub scope: Option<String>,
    pub agent: Option<usize>,
    /// Dot-separated path into the state value.
    pub path: Option<String>,
    /// eq | ne | contains | exists.
    pub op: Option<String>,
    pub value: Option<toml::Value>,
    #[serde(default)]
    pub all: Vec<Predicate>,
    #[serde(default)]
    pub any: Vec<Predicate>,
    pub not: Option<Box<Predicate>>,
}

impl Predicate {
    pub fn validate(&self) -> Result<()> {
        let is_atom = self.op.is_some();
        let forms = [is_atom, !self.all.is_empty(), !self.any.is_empty(), self.not.is_some()];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(Error::Scenario(
                "predicate needs exactly one of: an op, all, any, not".into(),
            ));
        }
        if is_atom {
            let op = self.op.as_deref().unwrap();
            if !matches!(op, "eq" | "ne" | "contains" | "exists") {
                return Err(Error::Scenario(format!(
                    "unknown predicate op {op}; use eq, ne, contains, or exists"
                )));
            }
            if self.path.is_none() {
                return Err(Error::Scenario(format!("predicate op {op} needs a path")));
            }
            if (op == "exists") == self.value.is_some() {
                return Err(Error::Scenario(format!(
                    "predicate op {op} {} a value",
                    if op == "exists" { "does not take" } else { "needs" }
                )));
            }
            match self.scope.as_deref().unwrap_or("env") {
                "env" => {
                    if self.agent.is_some() {
                        return Err(Error::Scenario(
                            "agent is only meaningful with scope = \"agent\"".into(),
                        ));
                    }
                }
                "agent" => match self.agent {
                    Some(a) if a >= 1 => {}
                    _ => {
                        return Err(Error::Scenario(
                            "scope = \"agent\" needs a 1-based agent number".into(),
                        ))
                    }
                },
                other => {
                    return Err(Error::Scenario(format!(
                        "unknown predicate scope {other}; use env or agent"
                    )))
                }
            }
        } else if self.scope.is_some()
            || self.agent.is_some()
            || self.path.is_some()
            || self.value.is_some()
        {
            return Err(Error::Scenario(
                "combinator predicates take no scope, agent, path, or value".into(),
            ));
        }
        for sub in self.all.iter().chain(&self.any) {
            sub.validate()?;
        }
        if let Some(sub) = &self.not {
            sub.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct QueryDef {
    pub name: Option<String>,
    pub expr: String,
    /// empty | nonempty | full | holds | fails. holds/fails evaluate at
    /// the point given by run and time. Without an expectation the query
    /// is informational and never fails the scenario.
    pub expect: Option<String>,
    pub run: Option<usize>,
    pub time: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Limits {
    pub budget: Option<usize>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputPaths {
    pub report: Option<String>,
    pub graph: Option<String>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let tables = [
            (self.coord_attack.is_some(), SuiteKind::CoordAttack, "coord-attack"),
            (self.byzantine.is_some(), SuiteKind::Byzantine, "byzantine"),
            (self.game.is_some(), SuiteKind::Game, "game"),
            (self.custom.is_some(), SuiteKind::Custom, "custom"),
        ];
        for (present, suite, key) in tables {
            if present && suite != self.suite {
                return Err(Error::Scenario(format!(
                    "[{key}] parameters are set, but the suite is {}",
                    self.suite
                )));
            }
        }
        match self.suite {
            SuiteKind::CoordAttack => {
                if let Some(p) = &self.coord_attack {
                    if p.transits == 0 {
                        return Err(Error::Scenario("transits must be at least 1".into()));
                    }
                    if let Some(rule) = &p.attack_rule {
                        rule.parse::<crate::coord::AttackRule>()?;
                    }
                }
            }
            SuiteKind::Byzantine => {
                let p = self
                    .byzantine
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("byzantine suite needs a [byzantine] table".into()))?;
                p.failures.parse::<crate::byzantine::FailureKind>()?;
                p.rule.parse::<crate::byzantine::DecisionRule>()?;
                if let Some(exp) = &p.experiment {
                    if exp != "lower-bound" {
                        return Err(Error::Scenario(format!(
                            "unknown experiment {exp}; only lower-bound exists"
                        )));
                    }
                    if !self.event.is_empty() || !self.query.is_empty() {
                        return Err(Error::Scenario(
                            "experiment scenarios take no events or queries".into(),
                        ));
                    }
                }
            }
            SuiteKind::Game => {
                let p = self
                    .game
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("game suite needs a [game] table".into()))?;
                match p.model.as_str() {
                    "state-space" => {
                        if p.base.is_some() || p.switch_at.is_some() || p.switch_to.is_some() {
                            return Err(Error::Scenario(
                                "the state-space model takes no strategy fields".into(),
                            ));
                        }
                    }
                    "imperfect-recall" => {
                        if p.switch_at.is_some() != p.switch_to.is_some() {
                            return Err(Error::Scenario(
                                "switch-at and switch-to come as a pair".into(),
                            ));
                        }
                    }
                    other => {
                        return Err(Error::Scenario(format!(
                            "unknown game model {other}; use state-space or imperfect-recall"
                        )))
                    }
                }
            }
            SuiteKind::Custom => {
                let p = self
                    .custom
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("custom suite needs [[custom.runs]]".into()))?;
                if p.runs.is_empty() {
                    return Err(Error::Scenario("custom suite needs at least one run".into()));
                }
            }
        }

        let mut names = BTreeSet::new();
        for def in &self.event {
            if !names.insert(def.name.as_str()) {
                return Err(Error::Scenario(format!("duplicate event name {}", def.name)));
            }
            match (&def.builtin, &def.when) {
                (Some(_), None) => {}
                (None, Some(p)) => p.validate()?,
                _ => {
                    return Err(Error::Scenario(format!(
                        "event {} needs exactly one of builtin or when",
                        def.name
                    )))
                }
            }
        }
        for q in &self.query {
            parse_query(&q.expr)?;
            match q.expect.as_deref() {
                None | Some("empty") | Some("nonempty") | Some("full") => {
                    if q.run.is_some() || q.time.is_some() {
                        return Err(Error::Scenario(
                            "run/time only apply to expect = holds or fails".into(),
                        ));
                    }
                }
                Some("holds") | Some("fails") => {
                    if q.run.is_none() || q.time.is_none() {
                        return Err(Error::Scenario(
                            "expect = holds/fails needs run and time".into(),
                        ));
                    }
                }
                Some(other) => {
                    return Err(Error::Scenario(format!(
                        "unknown expectation {other}; use empty, nonempty, full, holds, or fails"
                    )))
                }
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Config-file literals as state atoms. Floats and datetimes have no
/// exact equality, so they are rejected rather than approximated.
pub fn value_from_toml(v: &toml::Value) -> Result<Value> {
    match v {
        toml::Value::String(s) => Ok(Value::sym(s.clone())),
        toml::Value::Integer(i) => Ok(Value::Int(*i)),
        toml::Value::Boolean(b) => Ok(Value::Bool(*b)),
        toml::Value::Float(_) => Err(Error::Scenario(
            "floating-point values cannot be state atoms".into(),
        )),
        toml::Value::Datetime(_) => Err(Error::Scenario(
            "datetime values cannot be state atoms".into(),
        )),
        toml::Value::Array(xs) => Ok(Value::Seq(
            xs.iter().map(value_from_toml).collect::<Result<_>>()?,
        )),
        toml::Value::Table(t) => Ok(Value::Rec(
            t.iter()
                .map(|(k, x)| Ok((k.clone(), value_from_toml(x)?)))
                .collect::<Result<_>>()?,
        )),
    }
}

// ---- query expressions -----------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    All,
    Agents(Vec<usize>),
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::All => write!(f, "all"),
            GroupSpec::Agents(ids) => {
                let xs: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "{{{}}}", xs.join(","))
            }
        }
    }
}

/// K(i, e): agent i knows e. E(g, e): everyone in g knows e. C(g, e):
/// e is common knowledge in g. CN(e): e is common knowledge among the
/// nonfaulty. Leaves are event names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryExpr {
    Name(String),
    Knows(usize, Box<QueryExpr>),
    Everyone(GroupSpec, Box<QueryExpr>),
    Common(GroupSpec, Box<QueryExpr>),
    NonfaultyCommon(Box<QueryExpr>),
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Name(n) => write!(f, "{n}"),
            QueryExpr::Knows(i, e) => write!(f, "K({i}, {e})"),
            QueryExpr::Everyone(g, e) => write!(f, "E({g}, {e})"),
            QueryExpr::Common(g, e) => write!(f, "C({g}, {e})"),
            QueryExpr::NonfaultyCommon(e) => write!(f, "CN({e})"),
        }
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Scenario(format!(
            "query \"{}\", offset {}: {msg}",
            self.src, self.pos
        )))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.fail(&format!("expected '{c}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..]
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail("expected a name");
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail("expected an agent number");
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| Error::Scenario(format!("bad number in query \"{}\"", self.src)))
    }

    fn agent(&mut self) -> Result<usize> {
        let n = self.number()?;
        if n == 0 {
            return self.fail("agent ids are 1-based");
        }
        Ok(n)
    }

    fn group(&mut self) -> Result<GroupSpec> {
        self.skip_ws();
        if self.peek() == Some('{') {
            self.eat('{')?;
            let mut ids = vec![self.agent()?];
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(',') => {
                        self.eat(',')?;
                        ids.push(self.agent()?);
                    }
                    Some('}') => {
                        self.eat('}')?;
                        break;
                    }
                    _ => return self.fail("expected ',' or '}' in agent set"),
                }
            }
            ids.sort_unstable();
            ids.dedup();
            Ok(GroupSpec::Agents(ids))
        } else if self.ident()? == "all" {
            Ok(GroupSpec::All)
        } else {
            self.fail("expected an agent set {..} or all")
        }
    }

    fn expr(&mut self) -> Result<QueryExpr> {
        let name = self.ident()?;
        self.skip_ws();
        let is_call = self.peek() == Some('(');
        match (name.as_str(), is_call) {
            ("K", true) => {
                self.eat('(')?;
                let agent = self.agent()?;
                self.eat(',')?;
                let sub = self.expr()?;
                self.eat(')')?;
                Ok(QueryExpr::Knows(agent, Box::new(sub)))
            }
            ("E", true) | ("C", true) => {
                self.eat('(')?;
                let group = self.group()?;
                self.eat(',')?;
                let sub = self.expr()?;
                self.eat(')')?;
                Ok(if name == "E" {
                    QueryExpr::Everyone(group, Box::new(sub))
                } else {
                    QueryExpr::Common(group, Box::new(sub))
                })
            }
            ("CN", true) => {
                self.eat('(')?;
                let sub = self.expr()?;
                self.eat(')')?;
                Ok(QueryExpr::NonfaultyCommon(Box::new(sub)))
            }
            (_, true) => self.fail(&format!("unknown operator {name}; use K, E, C, or CN")),
            (_, false) => Ok(QueryExpr::Name(name)),
        }
    }
}

pub fn parse_query(src: &str) -> Result<QueryExpr> {
    let mut c = Cursor { src, pos: 0 };
    let e = c.expr()?;
    c.skip_ws();
    if c.pos != src.len() {
        return c.fail("trailing input after the expression");
    }
    Ok(e)
}
