//! Plays whose outcome can still become a well-formed plan.
//!
//! The round rules only enforce event sequence validity. A play can
//! therefore run a token past its maximum duration, restart a variable
//! with a forbidden value, or leave some variables closed while others are
//! still running. Such plays can never produce a plan that respects the
//! variables, and neither can plays where one of these has become
//! unavoidable. The arena has no edges for them. This module states that
//! fragment directly on rounds, without going through any automaton.

use std::collections::{BTreeSet, HashSet};

use super::events::{openness, timestamps, EventSequence};
use super::game::{Endpoint, Game, Upper};
use super::rounds::{apply_round, open_for_all, Round, RoundKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("round {round}: {reason}")]
pub struct Undisciplined {
    /// 0-based index of the offending round.
    pub round: usize,
    pub reason: String,
}

struct Token<'a> {
    value: &'a str,
    start: u64,
    end: Option<u64>,
}

fn tokens<'a>(plan: &'a EventSequence, var: &str) -> Result<Vec<Token<'a>>, String> {
    let times = timestamps(plan);
    let mut out: Vec<Token<'a>> = Vec::new();
    for (event, &t) in plan.events.iter().zip(&times) {
        if let Some(end) = event.end_of(var) {
            match out.last_mut() {
                Some(tok) if tok.end.is_none() && tok.value == end.value => tok.end = Some(t),
                _ => return Err(format!("{end} does not close the running token of `{var}`")),
            }
        }
        if let Some(start) = event.start_of(var) {
            out.push(Token { value: &start.value, start: t, end: None });
        }
    }
    Ok(out)
}

fn check_variables(plan: &EventSequence, game: &Game) -> Result<(), String> {
    let now = timestamps(plan).last().copied().unwrap_or(0);
    for var in game.variables() {
        let toks = tokens(plan, &var.name)?;
        for (i, tok) in toks.iter().enumerate() {
            let value = var.value(tok.value).ok_or_else(|| format!("unknown value {}", tok.value))?;
            match tok.end {
                Some(end) if !value.admits_duration(end - tok.start) => {
                    return Err(format!("token {}={} lasts {}", var.name, tok.value, end - tok.start));
                }
                None if !value.max_duration.admits(now - tok.start) => {
                    return Err(format!("token {}={} overruns its maximum duration", var.name, tok.value));
                }
                _ => {}
            }
            if let Some(next) = toks.get(i + 1) {
                if !value.successors.contains(next.value) {
                    return Err(format!("{}={} cannot follow {}", var.name, next.value, tok.value));
                }
            }
        }
    }
    Ok(())
}

/// Whether the plan can be extended to a closed plan that respects every
/// variable. Each variable's possible running tokens (value, age) are
/// advanced one time unit at a time until all variables can end together,
/// or the tuple of sets repeats.
pub fn can_still_close(plan: &EventSequence, game: &Game) -> bool {
    let Some(&now) = timestamps(plan).last() else { return true };
    let vars: Vec<_> = game.variables().collect();
    let mut sets: Vec<BTreeSet<(usize, u64)>> = Vec::new();
    let mut all_ended = true;
    for var in &vars {
        let Ok(toks) = tokens(plan, &var.name) else { return false };
        let Some(last) = toks.last() else { return false };
        let Some(v) = var.value_index(last.value) else { return false };
        match last.end {
            None => {
                all_ended = false;
                sets.push(BTreeSet::from([(v, now - last.start)]));
            }
            Some(end) if end == now => {
                let succ = var.values[v].successors.iter().filter_map(|s| var.value_index(s)).map(|i| (i, 0)).collect();
                sets.push(succ);
            }
            Some(_) => return false,
        }
    }
    if all_ended {
        return true;
    }
    let cap = |v: &crate::model::Value, age: u64| match v.max_duration {
        Upper::Finite(_) => age,
        Upper::Infinite => age.min(v.min_duration),
    };
    let mut seen = HashSet::new();
    while seen.insert(sets.clone()) {
        let mut can_end_all = true;
        let mut next = Vec::with_capacity(sets.len());
        for (var, set) in vars.iter().zip(&sets) {
            let mut can_end = false;
            let mut out = BTreeSet::new();
            for &(v, age) in set {
                let value = &var.values[v];
                let age = age + 1;
                if !value.max_duration.admits(age) {
                    continue;
                }
                out.insert((v, cap(value, age)));
                if age >= value.min_duration {
                    can_end = true;
                    out.extend(value.successors.iter().filter_map(|s| var.value_index(s)).map(|i| (i, 0)));
                }
            }
            can_end_all &= can_end;
            next.push(out);
        }
        if can_end_all {
            return true;
        }
        if next.iter().any(BTreeSet::is_empty) {
            return false;
        }
        sets = next;
    }
    false
}

/// Applies `rounds` from the empty plan and checks that every prefix stays
/// within the fragment represented by the arena with gap bound `d`.
pub fn check_discipline(rounds: &[Round], game: &Game, d: u64) -> Result<EventSequence, Undisciplined> {
    let mut plan = EventSequence::default();
    let mut terminal = false;
    for (i, round) in rounds.iter().enumerate() {
        let fail = |reason: String| Err(Undisciplined { round: i, reason });
        if terminal {
            return fail("the plan is already closed".into());
        }
        if round.kind() == RoundKind::Ending && round.delay() > d {
            return fail(format!("delay {} exceeds the gap bound {d}", round.delay()));
        }
        plan = match apply_round(&plan, round, game) {
            Ok(p) => p,
            Err(e) => return fail(e.to_string()),
        };
        if let Err(reason) = check_variables(&plan, game) {
            return fail(reason);
        }
        if !can_still_close(&plan, game) {
            return fail("no closed plan respecting the variables extends this play".into());
        }
        let last = plan.events.last().expect("a round always leaves an event");
        match round.kind() {
            RoundKind::Starting => {
                if open_for_all(&plan, game) {
                    continue;
                }
                let all_closed = game.variables().all(|v| !openness(&plan, &v.name).is_open_right());
                if i == 0 && game.variables().next().is_some() {
                    return fail("the first event must start every variable".into());
                }
                if !all_closed {
                    return fail("some variables are closed while others keep running".into());
                }
                terminal = true;
            }
            RoundKind::Ending => {
                let ended: Vec<_> = last.actions.iter().filter(|a| a.kind == Endpoint::End).collect();
                if ended.len() == game.variables().count() {
                    continue;
                }
                for action in ended {
                    let value = game.variable(&action.var).and_then(|v| v.value(&action.value));
                    if value.is_some_and(|v| v.successors.is_empty()) {
                        return fail(format!("{action} leaves `{}` without a successor", action.var));
                    }
                }
            }
        }
    }
    Ok(plan)
}
