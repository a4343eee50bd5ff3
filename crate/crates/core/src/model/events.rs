use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::game::{Action, Endpoint, StateVariable};

/// A set of actions happening `delay` time units after the previous event.
/// The first event of a sequence carries delay 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub actions: BTreeSet<Action>,
    pub delay: u64,
}

impl Event {
    pub fn new(actions: impl IntoIterator<Item = Action>, delay: u64) -> Self {
        Event { actions: actions.into_iter().collect(), delay }
    }

    pub fn empty(delay: u64) -> Self {
        Event { actions: BTreeSet::new(), delay }
    }

    pub fn starts(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| a.kind == Endpoint::Start)
    }

    pub fn ends(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| a.kind == Endpoint::End)
    }

    fn find(&self, kind: Endpoint, var: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.kind == kind && a.var == var)
    }

    pub fn start_of(&self, var: &str) -> Option<&Action> {
        self.find(Endpoint::Start, var)
    }

    pub fn end_of(&self, var: &str) -> Option<&Action> {
        self.find(Endpoint::End, var)
    }

    fn has(&self, kind: Endpoint, var: &str, value: &str) -> bool {
        self.actions.iter().any(|a| a.kind == kind && a.var == var && a.value == value)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("({")?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}, {})", self.delay)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSequence {
    pub events: Vec<Event>,
}

impl From<Vec<Event>> for EventSequence {
    fn from(events: Vec<Event>) -> Self {
        EventSequence { events }
    }
}

impl fmt::Display for EventSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(">")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// A token is started again before the open one ends.
    Restart,
    /// A token is ended twice.
    Reend,
    /// An end at a non-final event without a start of the same variable.
    GapRight,
    /// A start at a non-initial event without an end of the same variable.
    GapLeft,
    /// Two starts or two ends of one variable in the same event.
    Duplicate,
    /// A non-initial event with delay 0.
    ZeroDelay,
    /// An action on an undeclared variable or value.
    Undeclared,
}

impl Condition {
    /// Number of the violated clause of the event sequence definition, if any.
    pub fn clause(self) -> Option<u8> {
        match self {
            Condition::Restart => Some(1),
            Condition::Reend => Some(2),
            Condition::GapRight => Some(3),
            Condition::GapLeft => Some(4),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}", self.describe())]
pub struct Violation {
    pub condition: Condition,
    pub var: String,
    /// 1-based index of the offending event.
    pub index: usize,
}

impl Violation {
    fn describe(&self) -> String {
        let what = match self.condition {
            Condition::Restart => "token started while another one is open",
            Condition::Reend => "token ended twice",
            Condition::GapRight => "token ended without a following start",
            Condition::GapLeft => "token started without a preceding end",
            Condition::Duplicate => "two starts or two ends in one event",
            Condition::ZeroDelay => "non-initial event with zero delay",
            Condition::Undeclared => "undeclared variable or value",
        };
        let what = match self.condition.clause() {
            Some(c) => format!("condition {c} ({what})"),
            None => what.to_string(),
        };
        format!("{what} on variable `{}` at event {}", self.var, self.index)
    }
}

/// Checks the four event sequence conditions literally, plus the event
/// shape constraints. Reports the first violation in event order.
pub fn validate_event_sequence(seq: &EventSequence, vars: &[StateVariable]) -> Result<(), Violation> {
    let events = &seq.events;
    let n = events.len();
    let fail = |condition, var: &str, index| Err(Violation { condition, var: var.to_string(), index });

    for (i, event) in events.iter().enumerate() {
        if i > 0 && event.delay == 0 {
            let var = event.actions.iter().next().map(|a| a.var.as_str()).unwrap_or("");
            return fail(Condition::ZeroDelay, var, i + 1);
        }
        for a in &event.actions {
            let declared = vars.iter().find(|v| v.name == a.var).is_some_and(|v| v.value(&a.value).is_some());
            if !declared {
                return fail(Condition::Undeclared, &a.var, i + 1);
            }
        }
        for var in vars {
            let starts = event.starts().filter(|a| a.var == var.name).count();
            let ends = event.ends().filter(|a| a.var == var.name).count();
            if starts > 1 || ends > 1 {
                return fail(Condition::Duplicate, &var.name, i + 1);
            }
        }
    }

    for (i, event) in events.iter().enumerate() {
        for var in vars {
            let x = var.name.as_str();
            if let Some(start) = event.start_of(x) {
                let closing = (i + 1..n).find(|&k| events[k].has(Endpoint::End, x, &start.value)).unwrap_or(n);
                if let Some(j) = (i + 1..closing).find(|&j| events[j].start_of(x).is_some()) {
                    return fail(Condition::Restart, x, j + 1);
                }
            }
            if let Some(end) = event.end_of(x) {
                let opening = (0..i).rev().find(|&k| events[k].has(Endpoint::Start, x, &end.value));
                let from = opening.map_or(0, |k| k + 1);
                if (from..i).any(|j| events[j].end_of(x).is_some()) {
                    return fail(Condition::Reend, x, i + 1);
                }
                if i + 1 < n && event.start_of(x).is_none() {
                    return fail(Condition::GapRight, x, i + 1);
                }
            }
            if i > 0 && event.start_of(x).is_some() && event.end_of(x).is_none() {
                return fail(Condition::GapLeft, x, i + 1);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Openness {
    Closed,
    OpenLeft,
    OpenRight,
    OpenBoth,
}

impl Openness {
    pub fn is_open_right(self) -> bool {
        matches!(self, Openness::OpenRight | Openness::OpenBoth)
    }

    pub fn is_open_left(self) -> bool {
        matches!(self, Openness::OpenLeft | Openness::OpenBoth)
    }
}

/// Classifies `var` in a valid sequence: open on the right if a token is
/// started and never ended, on the left if a token ends without a start.
pub fn openness(seq: &EventSequence, var: &str) -> Openness {
    let mut pending: Option<&str> = None;
    let (mut left, mut right) = (false, false);
    for event in &seq.events {
        if let Some(end) = event.end_of(var) {
            match pending.take() {
                Some(v) if v == end.value => {}
                Some(_) => {
                    right = true;
                    left = true;
                }
                None => left = true,
            }
        }
        if let Some(start) = event.start_of(var) {
            if pending.is_some() {
                right = true;
            }
            pending = Some(&start.value);
        }
    }
    right |= pending.is_some();
    match (left, right) {
        (false, false) => Openness::Closed,
        (true, false) => Openness::OpenLeft,
        (false, true) => Openness::OpenRight,
        (true, true) => Openness::OpenBoth,
    }
}

pub fn is_closed(seq: &EventSequence, vars: &[StateVariable]) -> bool {
    vars.iter().all(|v| openness(seq, &v.name) == Openness::Closed)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("event range {i}..{j} out of bounds for a sequence of {len} events")]
pub struct RangeError {
    pub i: usize,
    pub j: usize,
    pub len: usize,
}

/// Time elapsed between events `i` and `j` (1-based, `i <= j`).
pub fn elapsed(seq: &EventSequence, i: usize, j: usize) -> Result<u64, RangeError> {
    if i == 0 || i > j || j > seq.events.len() {
        return Err(RangeError { i, j, len: seq.events.len() });
    }
    Ok(seq.events[i..j].iter().map(|e| e.delay).sum())
}

/// Total duration of the sequence; 0 for the empty sequence.
pub fn duration(seq: &EventSequence) -> u64 {
    seq.events.iter().skip(1).map(|e| e.delay).sum()
}

/// Absolute time of every event, the first one at 0.
pub fn timestamps(seq: &EventSequence) -> Vec<u64> {
    let mut t = 0;
    seq.events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if i > 0 {
                t += e.delay;
            }
            t
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("gap bound must be at least 1")]
pub struct ZeroGapBound;

/// Splits every delay larger than `d` by inserting empty events in front,
/// so that the original event keeps the remainder (at least 1).
pub fn normalize_gaps(seq: &EventSequence, d: u64) -> Result<EventSequence, ZeroGapBound> {
    if d == 0 {
        return Err(ZeroGapBound);
    }
    let mut events = Vec::with_capacity(seq.events.len());
    for (i, event) in seq.events.iter().enumerate() {
        let mut delay = event.delay;
        if i > 0 {
            while delay > d {
                events.push(Event::empty(d));
                delay -= d;
            }
        }
        events.push(Event { actions: event.actions.clone(), delay });
    }
    Ok(EventSequence { events })
}

/// Removes empty events, folding their delays into the next event.
/// Trailing empty events are dropped.
pub fn denormalize(seq: &EventSequence) -> EventSequence {
    let mut events: Vec<Event> = Vec::new();
    let mut carry = 0;
    for event in &seq.events {
        if event.actions.is_empty() {
            if !events.is_empty() {
                carry += event.delay;
            }
            continue;
        }
        let delay = if events.is_empty() { event.delay } else { event.delay + carry };
        carry = 0;
        events.push(Event { actions: event.actions.clone(), delay });
    }
    EventSequence { events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::game::Value;
    use proptest::prelude::*;

    fn var(name: &str, values: &[&str]) -> StateVariable {
        StateVariable { name: name.into(), values: values.iter().map(|v| Value::new(*v)).collect() }
    }

    fn seq(events: Vec<(Vec<Action>, u64)>) -> EventSequence {
        events.into_iter().map(|(a, d)| Event::new(a, d)).collect::<Vec<_>>().into()
    }

    #[test]
    fn empty_sequence_is_valid_and_closed() {
        let vars = [var("x", &["p"])];
        let s = EventSequence::default();
        assert_eq!(validate_event_sequence(&s, &vars), Ok(()));
        assert_eq!(openness(&s, "x"), Openness::Closed);
        assert_eq!(duration(&s), 0);
    }

    #[test]
    fn restart_while_open_violates_condition_one() {
        let vars = [var("x", &["p", "q"])];
        let s = seq(vec![(vec![Action::start("x", "p")], 0), (vec![Action::start("x", "q")], 1)]);
        let err = validate_event_sequence(&s, &vars).unwrap_err();
        assert_eq!(err.condition.clause(), Some(1));
        assert_eq!(err.var, "x");
        assert_eq!(err.index, 2);
    }

    #[test]
    fn openness_classification() {
        let start = seq(vec![(vec![Action::start("x", "p")], 0)]);
        let end = seq(vec![(vec![Action::end("x", "p")], 0)]);
        assert_eq!(openness(&start, "x"), Openness::OpenRight);
        assert_eq!(openness(&end, "x"), Openness::OpenLeft);
        assert_eq!(openness(&start, "y"), Openness::Closed);
    }

    #[test]
    fn elapsed_sums_delays() {
        let s = seq(vec![(vec![], 0), (vec![], 2), (vec![], 3)]);
        assert_eq!(elapsed(&s, 1, 3), Ok(5));
        assert_eq!(elapsed(&s, 2, 2), Ok(0));
        assert_eq!(elapsed(&s, 1, 3).unwrap(), duration(&s));
        assert!(elapsed(&s, 0, 1).is_err());
        assert!(elapsed(&s, 2, 4).is_err());
    }

    #[test]
    fn normalize_splits_long_delays() {
        let s = seq(vec![(vec![Action::start("x", "p")], 0), (vec![Action::end("x", "p")], 7)]);
        let n = normalize_gaps(&s, 3).unwrap();
        let delays: Vec<u64> = n.events.iter().map(|e| e.delay).collect();
        assert_eq!(delays, vec![0, 3, 3, 1]);
        assert!(n.events[1].actions.is_empty() && n.events[2].actions.is_empty());
        assert_eq!(normalize_gaps(&s, 7).unwrap(), s);
        assert_eq!(denormalize(&n), s);
        assert!(normalize_gaps(&s, 0).is_err());
    }

    /// Direct reading of the four conditions over a one-variable alphabet,
    /// written independently of `validate_event_sequence`.
    #[allow(clippy::needless_range_loop)]
    fn brute_valid(events: &[Vec<Action>]) -> bool {
        let n = events.len();
        let has = |i: usize, kind: Endpoint, v: &str| events[i].iter().any(|a| a.kind == kind && a.value == v);
        let any = |i: usize, kind: Endpoint| events[i].iter().any(|a| a.kind == kind);
        for i in 0..n {
            if events[i].iter().filter(|a| a.kind == Endpoint::Start).count() > 1
                || events[i].iter().filter(|a| a.kind == Endpoint::End).count() > 1
            {
                return false;
            }
            for a in &events[i] {
                match a.kind {
                    Endpoint::Start => {
                        let k = (i + 1..n).find(|&k| has(k, Endpoint::End, &a.value)).unwrap_or(n);
                        if (i + 1..k).any(|j| any(j, Endpoint::Start)) {
                            return false;
                        }
                        if i > 0 && !any(i, Endpoint::End) {
                            return false;
                        }
                    }
                    Endpoint::End => {
                        let k = (0..i).rev().find(|&k| has(k, Endpoint::Start, &a.value));
                        if (k.map_or(0, |k| k + 1)..i).any(|j| any(j, Endpoint::End)) {
                            return false;
                        }
                        if i + 1 < n && !any(i, Endpoint::Start) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    #[test]
    fn two_event_closed_sequences_over_one_value() {
        let vars = [var("x", &["p"])];
        let subsets: Vec<Vec<Action>> = vec![
            vec![],
            vec![Action::start("x", "p")],
            vec![Action::end("x", "p")],
            vec![Action::start("x", "p"), Action::end("x", "p")],
        ];
        let (mut brute, mut checked) = (0, 0);
        for a in &subsets {
            for b in &subsets {
                for delay in 1..=2 {
                    let s = seq(vec![(a.clone(), 0), (b.clone(), delay)]);
                    let closed = openness(&s, "x") == Openness::Closed;
                    if brute_valid(&[a.clone(), b.clone()]) && closed {
                        brute += 1;
                    }
                    if validate_event_sequence(&s, &vars).is_ok() && closed {
                        checked += 1;
                    }
                }
            }
        }
        assert_eq!(brute, checked);
        // ({start}, {end}) and (∅, ∅) for each delay.
        assert_eq!(checked, 4);
    }

    fn arb_valid_sequence() -> impl Strategy<Value = EventSequence> {
        // Tile one variable with tokens of random lengths, separated by
        // empty-free events.
        prop::collection::vec((1u64..9, prop::bool::ANY), 1..5).prop_map(|tokens| {
            let mut events = vec![Event::new([Action::start("x", "p")], 0)];
            let last = tokens.len() - 1;
            for (i, (len, _)) in tokens.iter().enumerate() {
                let mut actions = vec![Action::end("x", "p")];
                if i < last {
                    actions.push(Action::start("x", "p"));
                }
                events.push(Event::new(actions, *len));
            }
            EventSequence { events }
        })
    }

    proptest! {
        #[test]
        fn normalization_round_trips(s in arb_valid_sequence(), d in 1u64..5) {
            let n = normalize_gaps(&s, d).unwrap();
            prop_assert!(n.events.iter().skip(1).all(|e| e.delay >= 1 && e.delay <= d));
            prop_assert_eq!(duration(&n), duration(&s));
            prop_assert_eq!(denormalize(&n), s.clone());
            prop_assert!(validate_event_sequence(&n, &[var("x", &["p"])]).is_ok());
        }
    }
}
