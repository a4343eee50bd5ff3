//! Brute-force semantics of synchronization rules over closed plans.
//!
//! Everything here is deliberately naive: tokens are extracted by a linear
//! scan, and statements are checked by trying every assignment of tokens to
//! quantifiers. The automata are tested against these functions.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{
    is_closed, timestamps, validate_event_sequence, Atom, Endpoint, EventSequence, Game, PlanningProblem, Quantifier,
    Rule, StateVariable, Statement,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Token {
    pub var: String,
    pub value: String,
    pub start_time: u64,
    pub end_time: u64,
    /// 1-based event indices.
    pub start_index: usize,
    pub end_index: usize,
}

impl Token {
    fn time(&self, endpoint: Endpoint) -> i128 {
        match endpoint {
            Endpoint::Start => self.start_time as i128,
            Endpoint::End => self.end_time as i128,
        }
    }

    fn satisfies(&self, q: &Quantifier) -> bool {
        self.var == q.var && self.value == q.value
    }
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}@[{},{}]", self.var, self.value, self.start_time, self.end_time)
    }
}

pub type Assignment = BTreeMap<String, Token>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("the plan is not closed")]
    Open,
    #[error("enumeration would exceed the budget of {0} sequences")]
    Budget(usize),
}

/// Tokens of a closed plan, ordered by start time, then variable.
pub fn extract_tokens(seq: &EventSequence) -> Result<Vec<Token>, OracleError> {
    let times = timestamps(seq);
    let mut open: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
    let mut tokens = Vec::new();
    for (i, event) in seq.events.iter().enumerate() {
        for end in event.ends() {
            match open.remove(end.var.as_str()) {
                Some((value, s)) if value == end.value => tokens.push(Token {
                    var: end.var.clone(),
                    value: end.value.clone(),
                    start_time: times[s],
                    end_time: times[i],
                    start_index: s + 1,
                    end_index: i + 1,
                }),
                _ => return Err(OracleError::Open),
            }
        }
        for start in event.starts() {
            if open.insert(&start.var, (&start.value, i)).is_some() {
                return Err(OracleError::Open);
            }
        }
    }
    if !open.is_empty() {
        return Err(OracleError::Open);
    }
    tokens.sort_by(|a, b| (a.start_time, &a.var).cmp(&(b.start_time, &b.var)));
    Ok(tokens)
}

fn atom_holds(atom: &Atom, assignment: &Assignment) -> bool {
    let (Some(a), Some(b)) = (assignment.get(&atom.lhs.token), assignment.get(&atom.rhs.token)) else {
        return false;
    };
    let diff = b.time(atom.rhs.endpoint) - a.time(atom.lhs.endpoint);
    diff >= atom.lower as i128 && atom.upper.finite().is_none_or(|u| diff <= u as i128)
}

/// Searches for an assignment of the statement's quantifiers extending
/// `partial` under which every atom holds. Assignments need not be
/// injective.
pub fn find_assignment(stmt: &Statement, tokens: &[Token], partial: &Assignment) -> Option<Assignment> {
    fn go(qs: &[Quantifier], stmt: &Statement, tokens: &[Token], acc: &mut Assignment) -> bool {
        let Some((q, rest)) = qs.split_first() else {
            return stmt.atoms.iter().all(|a| atom_holds(a, acc));
        };
        for tok in tokens.iter().filter(|t| t.satisfies(q)) {
            acc.insert(q.token.clone(), tok.clone());
            if go(rest, stmt, tokens, acc) {
                return true;
            }
        }
        acc.remove(&q.token);
        false
    }
    let mut acc = partial.clone();
    go(&stmt.quantifiers, stmt, tokens, &mut acc).then_some(acc)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// The trigger token; absent for goals.
    pub trigger: Option<Token>,
    /// Index of the satisfied statement and its assignment.
    pub satisfied_by: Option<(usize, Assignment)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleCheck {
    pub rule: String,
    pub satisfied: bool,
    pub witnesses: Vec<Witness>,
}

impl RuleCheck {
    pub fn first_failure(&self) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.satisfied_by.is_none())
    }
}

fn witness(rule: &Rule, tokens: &[Token], trigger: Option<&Token>) -> Witness {
    let mut partial = Assignment::new();
    if let (Some(q), Some(tok)) = (&rule.trigger, trigger) {
        partial.insert(q.token.clone(), tok.clone());
    }
    let satisfied_by = rule
        .statements
        .iter()
        .enumerate()
        .find_map(|(i, stmt)| find_assignment(stmt, tokens, &partial).map(|a| (i, a)));
    Witness { trigger: trigger.cloned(), satisfied_by }
}

/// Checks one rule on the tokens of a closed plan. Goals (rules without a
/// trigger) must be witnessed once.
pub fn check_rule_tokens(rule: &Rule, tokens: &[Token]) -> RuleCheck {
    let witnesses: Vec<Witness> = match &rule.trigger {
        Some(q) => tokens.iter().filter(|t| t.satisfies(q)).map(|t| witness(rule, tokens, Some(t))).collect(),
        None => vec![witness(rule, tokens, None)],
    };
    let satisfied = witnesses.iter().all(|w| w.satisfied_by.is_some());
    RuleCheck { rule: rule.name.clone(), satisfied, witnesses }
}

pub fn check_rule(seq: &EventSequence, rule: &Rule) -> Result<RuleCheck, OracleError> {
    Ok(check_rule_tokens(rule, &extract_tokens(seq)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SolutionReport {
    Solution,
    Invalid { reason: String },
    Open,
    Unmentioned { var: String },
    BadDuration { token: Token },
    BadTransition { from: Token, to: Token },
    RuleViolated { rule: String, trigger: Option<Token> },
}

impl SolutionReport {
    pub fn is_solution(&self) -> bool {
        matches!(self, SolutionReport::Solution)
    }
}

fn check_variables(vars: &[StateVariable], tokens: &[Token]) -> Option<SolutionReport> {
    for var in vars {
        let mut toks: Vec<&Token> = tokens.iter().filter(|t| t.var == var.name).collect();
        if toks.is_empty() {
            return Some(SolutionReport::Unmentioned { var: var.name.clone() });
        }
        toks.sort_by_key(|t| t.start_time);
        for (i, tok) in toks.iter().enumerate() {
            let value = var.value(&tok.value)?;
            if !value.admits_duration(tok.end_time - tok.start_time) {
                return Some(SolutionReport::BadDuration { token: (*tok).clone() });
            }
            if let Some(next) = toks.get(i + 1) {
                if !value.successors.contains(&next.value) {
                    return Some(SolutionReport::BadTransition { from: (*tok).clone(), to: (*next).clone() });
                }
            }
        }
    }
    None
}

/// Full verdict of a plan against a problem: validity, closure, variable
/// constraints, then every rule in order.
pub fn solution_report(problem: &PlanningProblem, seq: &EventSequence) -> SolutionReport {
    if let Err(v) = validate_event_sequence(seq, &problem.variables) {
        return SolutionReport::Invalid { reason: v.to_string() };
    }
    if !is_closed(seq, &problem.variables) {
        return SolutionReport::Open;
    }
    let tokens = match extract_tokens(seq) {
        Ok(t) => t,
        Err(_) => return SolutionReport::Open,
    };
    if let Some(report) = check_variables(&problem.variables, &tokens) {
        return report;
    }
    for rule in &problem.rules {
        let check = check_rule_tokens(rule, &tokens);
        if let Some(w) = check.first_failure() {
            return SolutionReport::RuleViolated { rule: rule.name.clone(), trigger: w.trigger.clone() };
        }
    }
    SolutionReport::Solution
}

pub fn is_solution(problem: &PlanningProblem, seq: &EventSequence) -> bool {
    solution_report(problem, seq).is_solution()
}

/// Like [`is_solution`] but only checks the rules, not the variables'
/// durations and transitions.
pub fn satisfies_rules(problem: &PlanningProblem, seq: &EventSequence) -> bool {
    match extract_tokens(seq) {
        Ok(tokens) => problem.rules.iter().all(|r| check_rule_tokens(r, &tokens).satisfied),
        Err(_) => false,
    }
}

/// Whether the outcome of a play is a win for Charlie: a closed plan that
/// respects every variable and either satisfies the system rules or
/// violates some domain rule.
pub fn is_successful(game: &Game, seq: &EventSequence) -> bool {
    let system = game.system_problem();
    if is_solution(&system, seq) {
        return true;
    }
    let bare = PlanningProblem { variables: system.variables, rules: vec![] };
    is_solution(&bare, seq) && !satisfies_rules(&game.domain_problem(), seq)
}

/// Every valid closed sequence over `vars` with between 1 and `n_max`
/// events, delays in `1..=delta_max`, and at least one action. Sequences
/// without actions are closed too but carry no tokens and are left out.
///
/// Fails without producing anything when more than `budget` sequences
/// would be generated.
pub fn enumerate_closed_sequences(
    vars: &[StateVariable],
    n_max: usize,
    delta_max: u64,
    budget: usize,
) -> Result<Vec<EventSequence>, OracleError> {
    use crate::model::{Action, Event};

    #[derive(Clone, Copy, PartialEq)]
    enum Slot {
        Unused,
        Open(usize),
        Closed,
    }

    // Per variable choices at one event, given its slot and the position.
    fn choices(var: &StateVariable, slot: Slot, first: bool, last: bool) -> Vec<(Vec<Action>, Slot)> {
        let mut out = Vec::new();
        match slot {
            Slot::Unused if first => {
                out.push((vec![], Slot::Unused));
                for (i, v) in var.values.iter().enumerate() {
                    out.push((vec![Action::start(&var.name, &v.name)], Slot::Open(i)));
                }
            }
            Slot::Unused => out.push((vec![], Slot::Unused)),
            Slot::Closed => out.push((vec![], Slot::Closed)),
            Slot::Open(i) => {
                let end = Action::end(&var.name, &var.values[i].name);
                if last {
                    out.push((vec![end], Slot::Closed));
                } else {
                    out.push((vec![], Slot::Open(i)));
                    for (j, v) in var.values.iter().enumerate() {
                        out.push((vec![end.clone(), Action::start(&var.name, &v.name)], Slot::Open(j)));
                    }
                }
            }
        }
        out
    }

    struct Gen<'a> {
        vars: &'a [StateVariable],
        delta_max: u64,
        budget: usize,
        out: Vec<EventSequence>,
    }

    impl Gen<'_> {
        fn event(&mut self, n: usize, events: &mut Vec<Event>, slots: Vec<Slot>) -> Result<(), OracleError> {
            let i = events.len();
            if i == n {
                if slots.contains(&Slot::Closed) {
                    self.out.push(EventSequence { events: events.clone() });
                    if self.out.len() > self.budget {
                        return Err(OracleError::Budget(self.budget));
                    }
                }
                return Ok(());
            }
            let (first, last) = (i == 0, i + 1 == n);
            let mut combos: Vec<(Vec<Action>, Vec<Slot>)> = vec![(vec![], vec![])];
            for (var, &slot) in self.vars.iter().zip(&slots) {
                let mut next = Vec::new();
                for (acts, ss) in &combos {
                    for (a, s) in choices(var, slot, first, last) {
                        let mut acts = acts.clone();
                        acts.extend(a);
                        let mut ss = ss.clone();
                        ss.push(s);
                        next.push((acts, ss));
                    }
                }
                combos = next;
            }
            let delays: Vec<u64> = if first { vec![0] } else { (1..=self.delta_max).collect() };
            for (acts, ss) in combos {
                if first && acts.is_empty() {
                    continue;
                }
                for &delay in &delays {
                    events.push(Event::new(acts.clone(), delay));
                    self.event(n, events, ss.clone())?;
                    events.pop();
                }
            }
            Ok(())
        }
    }

    let mut gen = Gen { vars, delta_max, budget, out: Vec::new() };
    for n in 2..=n_max {
        gen.event(n, &mut Vec::new(), vec![Slot::Unused; vars.len()])?;
    }
    Ok(gen.out)
}
