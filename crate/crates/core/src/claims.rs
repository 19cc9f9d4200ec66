//! Relayed-preference claims for the full-information agreement protocol.
//!
//! A claim path [i1, i2, ..., im] with value v reads: "im said in round m
//! that i(m-1) said in round m-1 that ... i1's initial preference was v".
//! Paths never repeat an agent; a repeated hop adds nothing. An agent's
//! accumulated claims and a single round's message share the same compact
//! shape: a map from paths to values, each shared subpath stored once
//! instead of re-nested inside every statement that extends it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::state::AgentId;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pref {
    Attack,
    Retreat,
}

impl Pref {
    pub const ALL: [Pref; 2] = [Pref::Attack, Pref::Retreat];
}

impl fmt::Display for Pref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pref::Attack => write!(f, "attack"),
            Pref::Retreat => write!(f, "retreat"),
        }
    }
}

impl FromStr for Pref {
    type Err = Error;

    fn from_str(s: &str) -> Result<Pref> {
        match s {
            "attack" => Ok(Pref::Attack),
            "retreat" => Ok(Pref::Retreat),
            other => Err(Error::Config(format!(
                "unknown preference '{other}' (expected attack or retreat)"
            ))),
        }
    }
}

/// A repeat-free chain of agents, oldest claimant first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClaimPath(Vec<AgentId>);

impl ClaimPath {
    pub fn new(agents: Vec<AgentId>) -> Result<ClaimPath> {
        for (i, a) in agents.iter().enumerate() {
            if agents[..i].contains(a) {
                return Err(Error::Model(format!(
                    "claim path repeats agent {a}: {:?}",
                    agents.iter().map(|a| a.get()).collect::<Vec<_>>()
                )));
            }
        }
        Ok(ClaimPath(agents))
    }

    pub fn root() -> ClaimPath {
        ClaimPath(Vec::new())
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.0.contains(&agent)
    }

    pub fn extended(&self, agent: AgentId) -> Result<ClaimPath> {
        let mut v = self.0.clone();
        v.push(agent);
        ClaimPath::new(v)
    }

    fn key(&self) -> String {
        self.0
            .iter()
            .map(|a| a.get().to_string())
            .collect::<Vec<_>>()
            .join(".")
    }

    fn parse_key(key: &str) -> Result<ClaimPath> {
        if key.is_empty() {
            return Ok(ClaimPath::root());
        }
        let agents = key
            .split('.')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad claim path '{key}'")))
                    .map(AgentId::new)
            })
            .collect::<Result<Vec<_>>>()?;
        ClaimPath::new(agents)
    }
}

impl fmt::Display for ClaimPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.key())
    }
}

/// Map from claim paths to reported values. Used both for an agent's
/// accumulated knowledge (paths of every depth heard so far) and for a
/// single message (paths of one depth, sender excluded).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClaimTree {
    entries: BTreeMap<ClaimPath, Pref>,
}

impl ClaimTree {
    pub fn new() -> ClaimTree {
        ClaimTree::default()
    }

    /// First writer wins; a colliding later report is dropped so merging
    /// stays order-independent given deterministic iteration.
    pub fn insert(&mut self, path: ClaimPath, v: Pref) {
        self.entries.entry(path).or_insert(v);
    }

    pub fn get(&self, path: &ClaimPath) -> Option<Pref> {
        self.entries.get(path).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClaimPath, Pref)> {
        self.entries.iter().map(|(p, v)| (p, *v))
    }

    pub fn at_depth(&self, depth: usize) -> impl Iterator<Item = (&ClaimPath, Pref)> {
        self.iter().filter(move |(p, _)| p.len() == depth)
    }

    pub fn any_value(&self, v: Pref) -> bool {
        self.entries.values().any(|&x| x == v)
    }

    /// Fold a received message in: every entry is extended by the sender.
    /// Entries whose path already names the sender are repeats and dropped.
    pub fn merge_message(&mut self, msg: &ClaimTree, sender: AgentId) {
        for (path, v) in msg.iter() {
            if path.contains(sender) {
                continue;
            }
            if let Ok(extended) = path.extended(sender) {
                self.insert(extended, v);
            }
        }
    }

    pub fn to_value(&self) -> Value {
        Value::Rec(
            self.entries
                .iter()
                .map(|(p, v)| (p.key(), Value::sym(v.to_string())))
                .collect(),
        )
    }

    pub fn from_value(v: &Value) -> Result<ClaimTree> {
        let rec = v
            .as_rec()
            .ok_or_else(|| Error::Config(format!("claim tree must be a record, got {v}")))?;
        let mut tree = ClaimTree::new();
        for (key, val) in rec {
            let path = ClaimPath::parse_key(key)?;
            let pref = val
                .as_sym()
                .ok_or_else(|| Error::Config(format!("claim value must be a symbol, got {val}")))?
                .parse::<Pref>()?;
            tree.insert(path, pref);
        }
        Ok(tree)
    }
}
