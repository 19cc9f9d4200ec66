//! Structured values for local and environment states.
//!
//! A state is a finite tree of labeled atoms: round counters, observed
//! messages, preferences, decisions. Everything derives `Ord` so that runs
//! can be sorted and deduplicated deterministically, independent of how
//! they were produced.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(i64),
    Sym(String),
    Seq(Vec<Value>),
    Rec(BTreeMap<String, Value>),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Value {
        Value::Sym(s.into())
    }

    pub fn seq(items: impl IntoIterator<Item = Value>) -> Value {
        Value::Seq(items.into_iter().collect())
    }

    pub fn rec<K: Into<String>>(fields: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Rec(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Follow a dot-separated path of record fields and sequence indices.
    pub fn at(&self, path: &str) -> Option<&Value> {
        if path.is_empty() {
            return Some(self);
        }
        let mut cur = self;
        for seg in path.split('.') {
            cur = match cur {
                Value::Rec(m) => m.get(seg)?,
                Value::Seq(items) => items.get(seg.parse::<usize>().ok()?)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[Value]> {
        match self {
            Value::Seq(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_rec(&self) -> Option<&BTreeMap<String, Value>> {
        match self {
            Value::Rec(m) => Some(m),
            _ => None,
        }
    }

    /// Record field lookup without path splitting.
    pub fn field(&self, name: &str) -> Option<&Value> {
        self.as_rec().and_then(|m| m.get(name))
    }

    /// Containment: membership for sequences, key presence for records.
    pub fn contains(&self, needle: &Value) -> bool {
        match self {
            Value::Seq(items) => items.contains(needle),
            Value::Rec(m) => match needle {
                Value::Sym(k) => m.contains_key(k),
                _ => false,
            },
            _ => false,
        }
    }

    /// Functional field update, for building successor states.
    pub fn with(mut self, name: &str, v: Value) -> Value {
        match &mut self {
            Value::Rec(m) => {
                m.insert(name.to_string(), v);
                self
            }
            _ => Value::rec([(name, v)]),
        }
    }

    pub fn push(mut self, item: Value) -> Value {
        match &mut self {
            Value::Seq(items) => {
                items.push(item);
                self
            }
            _ => Value::seq([item]),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Value {
        Value::Int(i)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Value {
        Value::Int(i as i64)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Value {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Value {
        Value::Sym(s.to_string())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Seq(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Rec(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{k}:{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}
