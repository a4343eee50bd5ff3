//! The automaton of a set of rules, built from matching structures.
//!
//! The state keeps every structure still compatible with the events read
//! so far. Structures whose trigger start is matched are grouped by rule
//! and age: a group holds the alternative ways of satisfying one trigger
//! occurrence. A group that empties is a violation; a group that produces
//! a closed structure is satisfied and discarded.
//!
//! Ages are bounded by the window `W`. Groups that reach it leave the main
//! set. What happens next depends on the [`Policy`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use super::dfa::{Alphabet, Automaton};
use super::{BuildError, Symbol, Universe};
use crate::dbm::{compile_statement, is_contradictory, problem_durations, window, Dbm, MatchingStructure, StatementShape};
use crate::model::{Action, PlanningProblem};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Groups reaching the window are kept as separate pending
    /// obligations, each discharged independently.
    #[default]
    PerTrigger,
    /// One slot per statement for aged structures, with the reset
    /// bookkeeping over alternative statements. A newer promotion
    /// overwrites an older one; [`RuleStats::overwrites`] counts this.
    Literal,
}

type Group = BTreeSet<MatchingStructure>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LiveState {
    pub structures: BTreeSet<MatchingStructure>,
    /// Per-trigger policy: groups beyond the window.
    pub pending: BTreeSet<Group>,
    /// Literal policy: aged structures per statement, nonempty only.
    pub aged: BTreeMap<u16, Group>,
    /// Literal policy: alternatives per statement, where they differ from
    /// every statement of the rule.
    pub alternatives: BTreeMap<u16, BTreeSet<u16>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RuleState {
    /// Some rule is violated.
    Sink,
    Live(Box<LiveState>),
}

#[derive(Clone, Debug)]
struct StatementInfo {
    rule: u16,
    shape: StatementShape,
    initial: Dbm,
}

#[derive(Clone, Debug)]
struct RuleInfo {
    name: String,
    trigger: u8,
    statements: Vec<u16>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RuleStats {
    pub overwrites: u64,
    pub promotions: u64,
}

#[derive(Debug)]
pub struct RuleAutomaton {
    alphabet: Alphabet,
    policy: Policy,
    window: u64,
    statements: Vec<StatementInfo>,
    rules: Vec<RuleInfo>,
    overwrites: AtomicU64,
    promotions: AtomicU64,
}

impl RuleAutomaton {
    /// Compiles the rules of `problem` over `universe`. Every rule must
    /// have a trigger.
    pub fn new(problem: &PlanningProblem, universe: &Universe, d: u64, policy: Policy) -> Result<Self, BuildError> {
        let durations = problem_durations(problem);
        let mut statements = Vec::new();
        let mut rules = Vec::new();
        for (r, rule) in problem.rules.iter().enumerate() {
            let trigger =
                rule.trigger.as_ref().ok_or_else(|| crate::dbm::CompileError::Triggerless(rule.name.clone()))?;
            let start = universe.bit_of(&Action::start(&trigger.var, &trigger.value))?;
            let end = universe.bit_of(&Action::end(&trigger.var, &trigger.value))?;
            let mut ids = Vec::new();
            for stmt in rule.statements.iter().filter(|s| !is_contradictory(s)) {
                let mut tokens = vec![(start, end)];
                for q in &stmt.quantifiers {
                    tokens.push((
                        universe.bit_of(&Action::start(&q.var, &q.value))?,
                        universe.bit_of(&Action::end(&q.var, &q.value))?,
                    ));
                }
                ids.push(statements.len() as u16);
                statements.push(StatementInfo {
                    rule: r as u16,
                    shape: StatementShape { tokens },
                    initial: compile_statement(rule, stmt, &durations)?,
                });
            }
            rules.push(RuleInfo { name: rule.name.clone(), trigger: start, statements: ids });
        }
        Ok(RuleAutomaton {
            alphabet: Alphabet::of(universe, d),
            policy,
            window: window(problem),
            statements,
            rules,
            overwrites: AtomicU64::new(0),
            promotions: AtomicU64::new(0),
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn stats(&self) -> RuleStats {
        RuleStats {
            overwrites: self.overwrites.load(Ordering::Relaxed),
            promotions: self.promotions.load(Ordering::Relaxed),
        }
    }

    pub fn rule_name(&self, statement: u16) -> &str {
        &self.rules[self.statements[statement as usize].rule as usize].name
    }

    fn step_one(&self, m: &MatchingStructure, symbol: &Symbol) -> Vec<MatchingStructure> {
        let shape = &self.statements[m.statement as usize].shape;
        m.step(shape, symbol.actions, symbol.delay, self.window)
    }

    fn step_group<'a>(&self, group: impl IntoIterator<Item = &'a MatchingStructure>, symbol: &Symbol) -> Group {
        group.into_iter().flat_map(|m| self.step_one(m, symbol)).collect()
    }

    fn rule_of(&self, m: &MatchingStructure) -> u16 {
        self.statements[m.statement as usize].rule
    }

    /// Active structures grouped by `(rule, age)`, and the others.
    fn split(&self, structures: &BTreeSet<MatchingStructure>) -> (BTreeMap<(u16, u64), Group>, Group) {
        let mut groups: BTreeMap<(u16, u64), Group> = BTreeMap::new();
        let mut rest = Group::new();
        for m in structures {
            if m.is_active() {
                groups.entry((self.rule_of(m), m.age)).or_default().insert(m.clone());
            } else {
                rest.insert(m.clone());
            }
        }
        (groups, rest)
    }

    /// Every occurrence of a trigger in `symbol` must be captured by some
    /// structure.
    fn triggers_captured(&self, next: &Group, symbol: &Symbol) -> bool {
        self.rules.iter().enumerate().all(|(r, rule)| {
            !symbol.has(rule.trigger)
                || next.iter().any(|m| self.rule_of(m) == r as u16 && m.is_matched(0) && m.age == 0 && m.is_active())
        })
    }

    fn step_live(&self, state: &LiveState, symbol: &Symbol) -> Option<LiveState> {
        let (groups, rest) = self.split(&state.structures);
        let mut next = LiveState { structures: self.step_group(&rest, symbol), ..LiveState::default() };
        let mut promoted: Vec<(u16, Group)> = Vec::new();
        for (&(rule, age), group) in &groups {
            let stepped = self.step_group(group, symbol);
            if stepped.is_empty() {
                return None;
            }
            if stepped.iter().any(|m| m.is_closed()) {
                continue;
            }
            if age + symbol.delay < self.window {
                next.structures.extend(stepped);
            } else {
                promoted.push((rule, stepped));
            }
        }
        if !self.triggers_captured(&next.structures, symbol) {
            return None;
        }
        if !promoted.is_empty() {
            self.promotions.fetch_add(promoted.len() as u64, Ordering::Relaxed);
        }
        match self.policy {
            Policy::PerTrigger => {
                for group in &state.pending {
                    let stepped = self.step_group(group, symbol);
                    if stepped.is_empty() {
                        return None;
                    }
                    if !stepped.iter().any(|m| m.is_closed()) {
                        next.pending.insert(stepped);
                    }
                }
                next.pending.extend(promoted.into_iter().map(|(_, g)| g));
            }
            Policy::Literal => self.literal_aged(state, symbol, &promoted, &mut next),
        }
        Some(next)
    }

    /// The aged-slot and alternatives update of the literal policy.
    /// `promoted` is in increasing age order within each rule.
    fn literal_aged(&self, state: &LiveState, symbol: &Symbol, promoted: &[(u16, Group)], next: &mut LiveState) {
        // Statements with a successor in each promoted group.
        let psi: Vec<BTreeSet<u16>> =
            promoted.iter().map(|(_, g)| g.iter().map(|m| m.statement).collect()).collect();
        let mut aged: BTreeMap<u16, Group> = BTreeMap::new();
        let mut source: BTreeMap<u16, usize> = BTreeMap::new();
        for (e, info) in self.statements.iter().enumerate() {
            let e = e as u16;
            let stepped = state.aged.get(&e).map(|g| self.step_group(g, symbol)).unwrap_or_default();
            let fresh = promoted.iter().enumerate().find_map(|(k, (rule, g))| {
                let own: Group = g.iter().filter(|m| m.statement == e).cloned().collect();
                (*rule == info.rule && !own.is_empty()).then_some((k, own))
            });
            match fresh {
                Some((k, own)) => {
                    if !stepped.is_empty() {
                        self.overwrites.fetch_add(1, Ordering::Relaxed);
                    }
                    source.insert(e, k);
                    aged.insert(e, own);
                }
                None if !stepped.is_empty() => {
                    aged.insert(e, stepped);
                }
                None => {}
            }
        }
        let closed = |e: u16| aged.get(&e).is_some_and(|g| g.iter().any(|m| m.is_closed()));
        let mut alternatives = BTreeMap::new();
        for (e, info) in self.statements.iter().enumerate() {
            let e = e as u16;
            let all: BTreeSet<u16> = self.rules[info.rule as usize].statements.iter().copied().collect();
            let reset = source.iter().any(|(&e2, &k)| closed(e2) && psi[k].contains(&e));
            let alt = if reset {
                all.clone()
            } else {
                let mut alt = state.alternatives.get(&e).cloned().unwrap_or_else(|| all.clone());
                for p in &psi {
                    if !p.contains(&e) {
                        alt.retain(|x| !p.contains(x));
                    }
                }
                alt
            };
            if alt != all {
                alternatives.insert(e, alt);
            }
        }
        let alt_of = |e: u16| -> BTreeSet<u16> {
            alternatives.get(&e).cloned().unwrap_or_else(|| {
                self.rules[self.statements[e as usize].rule as usize].statements.iter().copied().collect()
            })
        };
        let cleared: BTreeSet<u16> =
            (0..self.statements.len() as u16).filter(|&e2| closed(e2)).flat_map(alt_of).collect();
        aged.retain(|e, _| !cleared.contains(e));
        next.aged = aged;
        next.alternatives = alternatives;
    }
}

impl Automaton for RuleAutomaton {
    type State = RuleState;

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn initial(&self) -> RuleState {
        let structures = self
            .statements
            .iter()
            .enumerate()
            .map(|(e, info)| MatchingStructure::initial(e as u16, info.initial.clone()))
            .collect();
        RuleState::Live(Box::new(LiveState { structures, ..LiveState::default() }))
    }

    fn step(&self, state: &RuleState, symbol: &Symbol) -> RuleState {
        match state {
            RuleState::Sink => RuleState::Sink,
            RuleState::Live(live) => match self.step_live(live, symbol) {
                Some(next) => RuleState::Live(Box::new(next)),
                None => RuleState::Sink,
            },
        }
    }

    fn is_accepting(&self, state: &RuleState) -> bool {
        match state {
            RuleState::Sink => false,
            RuleState::Live(live) => {
                live.pending.is_empty() && live.aged.is_empty() && !live.structures.iter().any(|m| m.is_active())
            }
        }
    }

    fn is_dead(&self, state: &RuleState) -> bool {
        *state == RuleState::Sink
    }
}
