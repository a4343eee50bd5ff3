//! Token validity: the automaton accepting exactly the closed plans whose
//! tokens respect durations and transitions, with every variable started
//! in the first event.

use serde::Serialize;

use super::dfa::{Alphabet, Automaton};
use super::{Symbol, Universe};
use crate::model::Upper;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum VarState {
    NotStarted,
    /// `elapsed` is time since the start, saturated once it reaches the
    /// minimum duration of an unbounded value.
    Open { value: u16, elapsed: u64 },
    Closed { value: u16 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TvState {
    Sink,
    Vars(Vec<VarState>),
}

#[derive(Clone, Debug)]
struct ValueInfo {
    start: u8,
    end: u8,
    min: u64,
    max: Upper,
    successors: Vec<u16>,
}

#[derive(Clone, Debug)]
pub struct TvAutomaton {
    alphabet: Alphabet,
    /// Per variable, per value.
    values: Vec<Vec<ValueInfo>>,
}

impl TvAutomaton {
    pub fn new(universe: &Universe, d: u64) -> Self {
        let values = universe
            .vars()
            .iter()
            .enumerate()
            .map(|(x, var)| {
                var.values
                    .iter()
                    .enumerate()
                    .map(|(v, val)| ValueInfo {
                        start: universe.start_bit(x, v),
                        end: universe.end_bit(x, v),
                        min: val.min_duration,
                        max: val.max_duration,
                        successors: val
                            .successors
                            .iter()
                            .filter_map(|s| var.value_index(s))
                            .map(|i| i as u16)
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        TvAutomaton { alphabet: Alphabet::of(universe, d), values }
    }

    fn saturate(info: &ValueInfo, elapsed: u64) -> u64 {
        match info.max {
            Upper::Finite(_) => elapsed,
            Upper::Infinite => elapsed.min(info.min),
        }
    }

    fn first(&self, symbol: &Symbol) -> TvState {
        let mut out = Vec::with_capacity(self.values.len());
        for vals in &self.values {
            if vals.iter().any(|v| symbol.has(v.end)) {
                return TvState::Sink;
            }
            let mut started = vals.iter().enumerate().filter(|(_, v)| symbol.has(v.start));
            match (started.next(), started.next()) {
                (Some((i, _)), None) => out.push(VarState::Open { value: i as u16, elapsed: 0 }),
                _ => return TvState::Sink,
            }
        }
        TvState::Vars(out)
    }

    fn later(&self, vars: &[VarState], symbol: &Symbol) -> TvState {
        let mut out = Vec::with_capacity(vars.len());
        for (vals, state) in self.values.iter().zip(vars) {
            let VarState::Open { value, elapsed } = *state else {
                return TvState::Sink;
            };
            let info = &vals[value as usize];
            let elapsed = elapsed.saturating_add(symbol.delay);
            if vals.iter().enumerate().any(|(i, v)| symbol.has(v.end) && i != value as usize) {
                return TvState::Sink;
            }
            let mut started = vals.iter().enumerate().filter(|(_, v)| symbol.has(v.start));
            let (start, extra) = (started.next(), started.next());
            if extra.is_some() {
                return TvState::Sink;
            }
            if symbol.has(info.end) {
                if elapsed < info.min || !info.max.admits(elapsed) {
                    return TvState::Sink;
                }
                match start {
                    Some((i, _)) if info.successors.contains(&(i as u16)) => {
                        out.push(VarState::Open { value: i as u16, elapsed: 0 })
                    }
                    Some(_) => return TvState::Sink,
                    None => out.push(VarState::Closed { value }),
                }
            } else {
                if start.is_some() || !info.max.admits(elapsed) {
                    return TvState::Sink;
                }
                out.push(VarState::Open { value, elapsed: Self::saturate(info, elapsed) });
            }
        }
        let closed = out.iter().filter(|s| matches!(s, VarState::Closed { .. })).count();
        if closed != 0 && closed != out.len() {
            return TvState::Sink;
        }
        TvState::Vars(out)
    }
}

impl Automaton for TvAutomaton {
    type State = TvState;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial(&self) -> TvState {
        TvState::Vars(vec![VarState::NotStarted; self.values.len()])
    }

    fn step(&self, state: &TvState, symbol: &Symbol) -> TvState {
        match state {
            TvState::Sink => TvState::Sink,
            // Without variables only empty events are possible.
            TvState::Vars(vars) if vars.is_empty() => {
                if symbol.actions == 0 {
                    state.clone()
                } else {
                    TvState::Sink
                }
            }
            TvState::Vars(vars) if vars[0] == VarState::NotStarted => self.first(symbol),
            TvState::Vars(vars) => self.later(vars, symbol),
        }
    }

    fn is_accepting(&self, state: &TvState) -> bool {
        match state {
            TvState::Sink => false,
            TvState::Vars(vars) => vars.iter().all(|v| matches!(v, VarState::Closed { .. })),
        }
    }

    fn is_dead(&self, state: &TvState) -> bool {
        match state {
            TvState::Sink => true,
            TvState::Vars(vars) => !vars.is_empty() && vars.iter().all(|v| matches!(v, VarState::Closed { .. })),
        }
    }
}

/// Every symbol that keeps `state` out of the sink, with delays `1..=d`
/// (only 1 for the first event). Sorted.
pub fn feasible_symbols(tv: &TvAutomaton, state: &TvState, d: u64) -> Vec<Symbol> {
    let TvState::Vars(vars) = state else {
        return Vec::new();
    };
    if vars.is_empty() {
        return (1..=d).map(|delay| Symbol::new(0, delay)).collect();
    }
    let mut out = Vec::new();
    if vars[0] == VarState::NotStarted {
        let mut masks = vec![0u128];
        for vals in &tv.values {
            masks = masks.iter().flat_map(|m| vals.iter().map(move |v| m | 1u128 << v.start)).collect();
        }
        out.extend(masks.into_iter().map(|m| Symbol::new(m, 1)));
    } else {
        for delay in 1..=d {
            // Masks that keep every variable open, and whether all can close.
            let mut open = vec![0u128];
            let mut closing = Some(0u128);
            for (vals, s) in tv.values.iter().zip(vars) {
                let VarState::Open { value, elapsed } = *s else {
                    return Vec::new();
                };
                let info = &vals[value as usize];
                let elapsed = elapsed.saturating_add(delay);
                let can_end = elapsed >= info.min && info.max.admits(elapsed);
                let mut options = Vec::new();
                if info.max.admits(elapsed) {
                    options.push(0);
                }
                if can_end {
                    for &n in &info.successors {
                        options.push(1u128 << info.end | 1u128 << vals[n as usize].start);
                    }
                }
                open = open.iter().flat_map(|m| options.iter().map(move |o| m | o)).collect();
                closing = closing.filter(|_| can_end).map(|m| m | 1u128 << info.end);
            }
            out.extend(open.into_iter().map(|m| Symbol::new(m, delay)));
            out.extend(closing.map(|m| Symbol::new(m, delay)));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Whether some continuation from `state` is accepted. Delays of 1 are
/// enough: a longer delay can be split with empty events.
pub fn can_close(tv: &TvAutomaton, state: &TvState) -> bool {
    let mut seen = std::collections::HashSet::from([state.clone()]);
    let mut queue = std::collections::VecDeque::from([state.clone()]);
    while let Some(q) = queue.pop_front() {
        if tv.is_accepting(&q) {
            return true;
        }
        for s in feasible_symbols(tv, &q, 1) {
            let r = tv.step(&q, &s);
            if seen.insert(r.clone()) {
                queue.push_back(r);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StateVariable, Value};

    fn universe() -> Universe {
        let p = Value { min_duration: 2, max_duration: Upper::Finite(3), successors: ["q".into()].into(), ..Value::new("p") };
        let q = Value { successors: ["p".into()].into(), ..Value::new("q") };
        Universe::new(&[StateVariable { name: "x".into(), values: vec![p, q] }]).unwrap()
    }

    #[test]
    fn durations_and_successors() {
        let u = universe();
        let tv = TvAutomaton::new(&u, 4);
        let (sp, ep, sq, eq) = (u.start_bit(0, 0), u.end_bit(0, 0), u.start_bit(0, 1), u.end_bit(0, 1));
        let bit = |b: u8| 1u128 << b;
        let ok = [Symbol::new(bit(sp), 1), Symbol::new(bit(ep) | bit(sq), 2), Symbol::new(bit(eq), 4)];
        assert!(tv.is_accepting(&tv.run(&ok)));
        let short = [Symbol::new(bit(sp), 1), Symbol::new(bit(ep), 1)];
        assert_eq!(tv.run(&short), TvState::Sink);
        let long = [Symbol::new(bit(sp), 1), Symbol::new(0, 4)];
        assert_eq!(tv.run(&long), TvState::Sink);
        let bad_succ = [Symbol::new(bit(sp), 1), Symbol::new(bit(ep) | bit(sp), 2)];
        assert_eq!(tv.run(&bad_succ), TvState::Sink);
    }

    #[test]
    fn feasible_symbols_stay_out_of_the_sink() {
        let u = universe();
        let tv = TvAutomaton::new(&u, 4);
        let q0 = tv.initial();
        let first = feasible_symbols(&tv, &q0, 4);
        assert_eq!(first.len(), 2);
        for s in &first {
            let q = tv.step(&q0, s);
            for t in feasible_symbols(&tv, &q, 4) {
                assert_ne!(tv.step(&q, &t), TvState::Sink);
            }
            // Anything else falls into the sink.
            let feasible = feasible_symbols(&tv, &q, 4);
            for mask in 0..16u128 {
                for delay in 1..=4 {
                    let t = Symbol::new(mask, delay);
                    if !feasible.contains(&t) {
                        assert_eq!(tv.step(&q, &t), TvState::Sink, "{t}");
                    }
                }
            }
        }
    }
}
