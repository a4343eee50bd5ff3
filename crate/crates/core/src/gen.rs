//! Random small problems and games for differential testing.

use rand::seq::SliceRandom;
use rand::Rng;

use std::collections::BTreeSet;

use crate::model::{
    check_discipline, Action, Atom, CharlieMove, Endpoint, EveMove, EventSequence, Game, PlanningProblem, Player,
    Quantifier, Round, Rule, StateVariable, Statement, Tag, Term, Upper, Value,
};

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub variables: usize,
    pub values: usize,
    pub rules: usize,
    pub statements: usize,
    pub quantifiers: usize,
    pub atoms: usize,
    /// Largest constant in durations and atom bounds.
    pub constant: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { variables: 2, values: 2, rules: 2, statements: 2, quantifiers: 2, atoms: 2, constant: 3 }
    }
}

fn upper(rng: &mut impl Rng, lower: u64, max: u64) -> Upper {
    if rng.gen_bool(0.4) {
        Upper::Infinite
    } else {
        Upper::Finite(rng.gen_range(lower..=max.max(lower)))
    }
}

pub fn random_variable(rng: &mut impl Rng, name: &str, limits: &Limits) -> StateVariable {
    let n = rng.gen_range(1..=limits.values);
    let names: Vec<String> = (0..n).map(|i| ["p", "q", "r", "s"].get(i).map_or(format!("v{i}"), |s| s.to_string())).collect();
    let values = names
        .iter()
        .map(|v| {
            let min = rng.gen_range(1..=2.min(limits.constant).max(1));
            Value {
                successors: names.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect(),
                min_duration: min,
                max_duration: upper(rng, min, limits.constant),
                tag: if rng.gen_bool(0.5) { Tag::Controllable } else { Tag::Uncontrollable },
                ..Value::new(v)
            }
        })
        .collect();
    StateVariable { name: name.to_string(), values }
}

fn quantifier(rng: &mut impl Rng, token: &str, vars: &[StateVariable]) -> Quantifier {
    let var = vars.choose(rng).expect("at least one variable");
    let value = var.values.choose(rng).expect("at least one value");
    Quantifier::new(token, &var.name, &value.name)
}

pub fn random_rule(rng: &mut impl Rng, name: &str, vars: &[StateVariable], limits: &Limits) -> Rule {
    let trigger = quantifier(rng, "a", vars);
    let statements = (0..rng.gen_range(1..=limits.statements))
        .map(|_| {
            let quantifiers: Vec<Quantifier> = (0..rng.gen_range(0..=limits.quantifiers))
                .map(|i| quantifier(rng, &format!("b{i}"), vars))
                .collect();
            let tokens: Vec<&str> =
                std::iter::once("a").chain(quantifiers.iter().map(|q| q.token.as_str())).collect();
            let term = |rng: &mut _| {
                let endpoint = if Rng::gen_bool(rng, 0.5) { Endpoint::Start } else { Endpoint::End };
                Term { endpoint, token: tokens.choose(rng).unwrap().to_string() }
            };
            let atoms = (0..rng.gen_range(0..=limits.atoms))
                .map(|_| {
                    let lower = rng.gen_range(0..=limits.constant);
                    let lower = if rng.gen_bool(0.5) { 0 } else { lower };
                    Atom { lhs: term(rng), rhs: term(rng), lower, upper: upper(rng, lower, limits.constant) }
                })
                .collect();
            Statement { quantifiers, atoms }
        })
        .collect();
    Rule { name: name.to_string(), trigger: Some(trigger), statements }
}

pub fn random_problem(rng: &mut impl Rng, limits: &Limits) -> PlanningProblem {
    let variables: Vec<StateVariable> =
        (0..rng.gen_range(1..=limits.variables)).map(|i| random_variable(rng, &format!("x{i}"), limits)).collect();
    let rules = (0..rng.gen_range(0..=limits.rules)).map(|i| random_rule(rng, &format!("r{i}"), &variables, limits)).collect();
    PlanningProblem { variables, rules }
}

/// A game with one controlled variable, at most one external variable, at
/// most `limits.rules` system rules and at most one domain rule.
pub fn random_game(rng: &mut impl Rng, limits: &Limits) -> Game {
    let controlled = vec![random_variable(rng, "x", limits)];
    let external = if rng.gen_bool(0.6) { vec![random_variable(rng, "y", limits)] } else { vec![] };
    let vars: Vec<StateVariable> = controlled.iter().chain(&external).cloned().collect();
    let system_rules =
        (0..rng.gen_range(0..=limits.rules)).map(|i| random_rule(rng, &format!("s{i}"), &vars, limits)).collect();
    let domain_rules = (0..rng.gen_range(0..=1)).map(|i| random_rule(rng, &format!("d{i}"), &vars, limits)).collect();
    Game { controlled, external, system_rules, domain_rules }
}

/// Action sets with at most one action of kind `kind` per variable, split
/// by owner.
fn action_sets(game: &Game, kind: Endpoint) -> (BTreeSet<BTreeSet<Action>>, BTreeSet<BTreeSet<Action>>) {
    let mut sets: Vec<BTreeSet<Action>> = vec![BTreeSet::new()];
    for var in game.variables() {
        let mut next = Vec::new();
        for set in &sets {
            next.push(set.clone());
            for value in &var.values {
                let mut set = set.clone();
                set.insert(Action { kind, var: var.name.clone(), value: value.name.clone() });
                next.push(set);
            }
        }
        sets = next;
    }
    let part = |player| -> BTreeSet<BTreeSet<Action>> {
        sets.iter().map(|s| s.iter().filter(|a| game.owner_of(a) == Some(player)).cloned().collect()).collect()
    };
    (part(Player::Charlie), part(Player::Eve))
}

/// The rounds tried at every step of [`visit_plays`]: every pair of plays
/// with at most one action per variable, and waits up to `d + 1`.
pub fn candidate_rounds(game: &Game, d: u64) -> Vec<Round> {
    let mut out = Vec::new();
    let (cs, es) = action_sets(game, Endpoint::Start);
    for c in &cs {
        for e in &es {
            out.extend(Round::new(CharlieMove::Play(c.clone()), EveMove::Play(e.clone())));
        }
    }
    let (ce, ee) = action_sets(game, Endpoint::End);
    for e in &ee {
        for c in ce.iter().filter(|c| !c.is_empty()) {
            out.extend(Round::new(CharlieMove::Play(c.clone()), EveMove::Play(e.clone())));
        }
        for wait in 1..=d + 1 {
            for delay in 1..=wait.min(d) {
                out.extend(Round::new(CharlieMove::Wait(wait), EveMove::PlayTimed(delay, e.clone())));
            }
        }
    }
    out
}

/// Calls `f` on every disciplined play of at most `max_rounds` rounds
/// built from [`candidate_rounds`], the empty play included, with its
/// outcome.
pub fn visit_plays(game: &Game, d: u64, max_rounds: usize, mut f: impl FnMut(&[Round], &EventSequence)) {
    fn go(
        game: &Game,
        d: u64,
        max: usize,
        candidates: &[Round],
        play: &mut Vec<Round>,
        outcome: &EventSequence,
        f: &mut dyn FnMut(&[Round], &EventSequence),
    ) {
        f(play, outcome);
        if play.len() == max {
            return;
        }
        for round in candidates {
            play.push(round.clone());
            if let Ok(next) = check_discipline(play, game, d) {
                go(game, d, max, candidates, play, &next, f);
            }
            play.pop();
        }
    }
    let candidates = candidate_rounds(game, d);
    go(game, d, max_rounds, &candidates, &mut Vec::new(), &EventSequence::default(), &mut f);
}
