//! Goals (rules without a trigger) become ordinary rules triggered by a
//! fresh controlled variable with a single value.

use crate::model::{Action, EventSequence, Game, PlanningProblem, Quantifier, Rule, StateVariable, Upper, Value};

pub const GOAL_VARIABLE: &str = "x_goal";
pub const GOAL_VALUE: &str = "g";

fn fresh_variable(mut taken: impl FnMut(&str) -> bool) -> String {
    let mut name = GOAL_VARIABLE.to_string();
    let mut k = 1;
    while taken(&name) {
        k += 1;
        name = format!("{GOAL_VARIABLE}_{k}");
    }
    name
}

fn goal_variable(name: &str) -> StateVariable {
    let value = Value {
        successors: [GOAL_VALUE.to_string()].into(),
        min_duration: 1,
        max_duration: Upper::Infinite,
        ..Value::new(GOAL_VALUE)
    };
    StateVariable { name: name.to_string(), values: vec![value] }
}

fn trigger_token(rule: &Rule) -> String {
    let used = |t: &str| rule.statements.iter().flat_map(|s| &s.quantifiers).any(|q| q.token == t);
    let mut k = 0;
    loop {
        let name = format!("goal{k}");
        if !used(&name) {
            return name;
        }
        k += 1;
    }
}

fn attach(rules: &mut [Rule], var: &str) {
    for rule in rules.iter_mut().filter(|r| r.trigger.is_none()) {
        rule.trigger = Some(Quantifier::new(trigger_token(rule), var, GOAL_VALUE));
    }
}

fn has_goals(rules: &[Rule]) -> bool {
    rules.iter().any(|r| r.trigger.is_none())
}

/// Replaces every goal by a rule triggered on one shared fresh controlled
/// variable. Games without goals are returned unchanged.
pub fn desugar_goals(game: &Game) -> Game {
    let mut out = game.clone();
    if !has_goals(&game.system_rules) && !has_goals(&game.domain_rules) {
        return out;
    }
    let name = fresh_variable(|n| game.variable(n).is_some());
    out.controlled.push(goal_variable(&name));
    attach(&mut out.system_rules, &name);
    attach(&mut out.domain_rules, &name);
    out
}

/// A plan of `game` as a plan of `desugar_goals(game)`: the fresh goal
/// variable, if any, gets one token from the first event to the last.
/// Plans that already mention it, and plans with fewer than two events,
/// are returned unchanged.
pub fn lift_goals(seq: &EventSequence, game: &Game) -> EventSequence {
    let desugared = desugar_goals(game);
    let Some(var) = desugared.controlled.iter().find(|v| game.variable(&v.name).is_none()) else {
        return seq.clone();
    };
    let mentioned = seq.events.iter().flat_map(|e| &e.actions).any(|a| a.var == var.name);
    if mentioned || seq.events.len() < 2 {
        return seq.clone();
    }
    let mut out = seq.clone();
    out.events[0].actions.insert(Action::start(&var.name, GOAL_VALUE));
    out.events.last_mut().expect("two events").actions.insert(Action::end(&var.name, GOAL_VALUE));
    out
}

/// The same translation for a planning problem.
pub fn desugar_problem(problem: &PlanningProblem) -> PlanningProblem {
    let mut out = problem.clone();
    if !has_goals(&problem.rules) {
        return out;
    }
    let name = fresh_variable(|n| problem.variable(n).is_some());
    out.variables.push(goal_variable(&name));
    attach(&mut out.rules, &name);
    out
}
