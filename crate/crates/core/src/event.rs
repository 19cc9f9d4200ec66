//! Events are sets of points, memoized as bitsets over a system's point
//! table. Building an event evaluates its predicate once per point; all
//! later operator applications are pure bitset work.

use fixedbitset::FixedBitSet;

use crate::error::Result;
use crate::state::Point;
use crate::system::System;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    name: String,
    bits: FixedBitSet,
}

impl Event {
    pub fn from_fn(
        sys: &System,
        name: impl Into<String>,
        mut pred: impl FnMut(&System, Point) -> bool,
    ) -> Event {
        let mut bits = FixedBitSet::with_capacity(sys.num_points());
        for p in sys.points() {
            if pred(sys, p) {
                bits.insert(sys.point_id(p).expect("point from iterator"));
            }
        }
        Event {
            name: name.into(),
            bits,
        }
    }

    pub fn empty(sys: &System, name: impl Into<String>) -> Event {
        Event {
            name: name.into(),
            bits: FixedBitSet::with_capacity(sys.num_points()),
        }
    }

    pub fn full(sys: &System, name: impl Into<String>) -> Event {
        let mut bits = FixedBitSet::with_capacity(sys.num_points());
        bits.insert_range(..);
        Event {
            name: name.into(),
            bits,
        }
    }

    pub(crate) fn from_bits(name: impl Into<String>, bits: FixedBitSet) -> Event {
        Event {
            name: name.into(),
            bits,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rename(mut self, name: impl Into<String>) -> Event {
        self.name = name.into();
        self
    }

    pub(crate) fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    /// Whether the event holds at a point of `sys`. Errors on foreign points.
    pub fn holds_at(&self, sys: &System, p: Point) -> Result<bool> {
        self.check(sys);
        Ok(self.bits.contains(sys.point_id(p)?))
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn points(&self, sys: &System) -> Vec<Point> {
        self.check(sys);
        self.bits.ones().map(|id| sys.point_of_id(id)).collect()
    }

    pub fn and(&self, other: &Event, name: impl Into<String>) -> Event {
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        Event::from_bits(name, bits)
    }

    pub fn or(&self, other: &Event, name: impl Into<String>) -> Event {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        Event::from_bits(name, bits)
    }

    pub fn not(&self, name: impl Into<String>) -> Event {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        Event::from_bits(name, bits)
    }

    pub fn minus(&self, other: &Event, name: impl Into<String>) -> Event {
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        Event::from_bits(name, bits)
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn same_points(&self, other: &Event) -> bool {
        self.bits == other.bits
    }

    /// Events are tied to the system they were built over; mixing systems is
    /// a programming error, not a recoverable condition.
    fn check(&self, sys: &System) {
        assert_eq!(
            self.bits.len(),
            sys.num_points(),
            "event '{}' was built over a different system",
            self.name
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{GlobalState, LocalState, Run};
    use crate::value::Value;

    fn sys() -> System {
        let g = |a: i64, t: i64| {
            GlobalState::new(
                Value::rec([("t", Value::Int(t))]),
                vec![LocalState(Value::Int(a))],
            )
        };
        System::new(vec![
            Run::new(vec![g(0, 0), g(1, 1)]).unwrap(),
            Run::new(vec![g(0, 0), g(2, 1)]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn membership_is_memoized_once() {
        let sys = sys();
        let mut evals = 0;
        let e = Event::from_fn(&sys, "late", |s, p| {
            evals += 1;
            s.global_state(p).unwrap().env.at("t").unwrap().as_int() == Some(1)
        });
        assert_eq!(evals, sys.num_points());
        assert_eq!(e.count(), 2);
        assert!(e.holds_at(&sys, Point::new(0, 1)).unwrap());
        assert!(!e.holds_at(&sys, Point::new(0, 0)).unwrap());
    }

    #[test]
    fn set_algebra() {
        let sys = sys();
        let e = Event::from_fn(&sys, "e", |_, p| p.time == 1);
        let f = Event::from_fn(&sys, "f", |_, p| p.run == 0);
        assert_eq!(e.and(&f, "ef").count(), 1);
        assert_eq!(e.or(&f, "e+f").count(), 3);
        assert_eq!(e.not("!e").count(), 2);
        assert!(e.and(&f, "ef").is_subset(&e));
    }
}
