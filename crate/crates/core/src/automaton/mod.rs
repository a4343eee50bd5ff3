//! Deterministic automata over events.
//!
//! Events are encoded as [`Symbol`]s: a bit set of actions over a fixed
//! [`Universe`] plus a delay. All automata are lazy: states are computed
//! on demand and memoized by an [`Explorer`].

mod dfa;
mod rules;
mod tv;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dfa::{
    accepts, complement, explore, intersect, union, Alphabet, AlphabetMismatch, Automaton, Complement, ExploreStats,
    Explorer, Product, ProductOp,
};
pub use rules::{Policy, RuleAutomaton, RuleState, RuleStats};
pub use tv::{can_close, feasible_symbols, TvAutomaton, TvState, VarState};

use crate::dbm::gap_bound;
use crate::lang::desugar_goals;
use crate::model::{Action, Endpoint, Event, EventSequence, Game, PlanningProblem, StateVariable};

/// A finite set of actions, each with a fixed bit position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Universe {
    vars: Vec<StateVariable>,
    /// Offset of each variable's first value in the global value list.
    offsets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UniverseError {
    #[error("{0} values in total; at most 64 are supported")]
    TooManyValues(usize),
    #[error("unknown action {0}")]
    UnknownAction(Action),
    #[error("delay {delay} at event {index} exceeds the gap bound {d}")]
    DelayTooLarge { index: usize, delay: u64, d: u64 },
}

impl Universe {
    pub fn new(vars: &[StateVariable]) -> Result<Universe, UniverseError> {
        let mut offsets = Vec::with_capacity(vars.len());
        let mut total = 0;
        for v in vars {
            offsets.push(total);
            total += v.values.len();
        }
        if total > 64 {
            return Err(UniverseError::TooManyValues(total));
        }
        Ok(Universe { vars: vars.to_vec(), offsets })
    }

    pub fn vars(&self) -> &[StateVariable] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn start_bit(&self, var: usize, value: usize) -> u8 {
        (2 * (self.offsets[var] + value)) as u8
    }

    pub fn end_bit(&self, var: usize, value: usize) -> u8 {
        self.start_bit(var, value) + 1
    }

    pub fn action_count(&self) -> usize {
        2 * self.vars.iter().map(|v| v.values.len()).sum::<usize>()
    }

    /// Actions in bit order.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for v in &self.vars {
            for val in &v.values {
                out.push(Action::start(&v.name, &val.name));
                out.push(Action::end(&v.name, &val.name));
            }
        }
        out
    }

    pub fn bit_of(&self, action: &Action) -> Result<u8, UniverseError> {
        let unknown = || UniverseError::UnknownAction(action.clone());
        let x = self.var_index(&action.var).ok_or_else(unknown)?;
        let v = self.vars[x].value_index(&action.value).ok_or_else(unknown)?;
        Ok(match action.kind {
            Endpoint::Start => self.start_bit(x, v),
            Endpoint::End => self.end_bit(x, v),
        })
    }

    pub fn encode_actions<'a>(&self, actions: impl IntoIterator<Item = &'a Action>) -> Result<u128, UniverseError> {
        actions.into_iter().try_fold(0u128, |acc, a| Ok(acc | 1u128 << self.bit_of(a)?))
    }

    pub fn decode_actions(&self, mask: u128) -> Vec<Action> {
        self.actions().into_iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, a)| a).collect()
    }

    /// Encodes a plan; the initial delay is read as 1.
    pub fn encode(&self, seq: &EventSequence, d: u64) -> Result<Vec<Symbol>, UniverseError> {
        seq.events
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let delay = if i == 0 { 1 } else { e.delay };
                if delay > d {
                    return Err(UniverseError::DelayTooLarge { index: i + 1, delay, d });
                }
                Ok(Symbol { actions: self.encode_actions(&e.actions)?, delay })
            })
            .collect()
    }

    pub fn decode(&self, symbol: &Symbol) -> Event {
        Event::new(self.decode_actions(symbol.actions), symbol.delay)
    }

    /// Decodes a word, giving the first event delay 0.
    pub fn decode_word(&self, word: &[Symbol]) -> EventSequence {
        let mut events: Vec<Event> = word.iter().map(|s| self.decode(s)).collect();
        if let Some(first) = events.first_mut() {
            first.delay = 0;
        }
        events.into()
    }

    pub fn display_symbol(&self, symbol: &Symbol) -> String {
        self.decode(symbol).to_string()
    }
}

/// An event over a [`Universe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub actions: u128,
    pub delay: u64,
}

impl Symbol {
    pub fn new(actions: u128, delay: u64) -> Self {
        Symbol { actions, delay }
    }

    pub fn has(&self, bit: u8) -> bool {
        self.actions >> bit & 1 == 1
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:#x}, {})", self.actions, self.delay)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Compile(#[from] crate::dbm::CompileError),
}

/// `TV_P ∩ S_P` for a planning problem.
pub type ProblemAutomaton = Product<TvAutomaton, RuleAutomaton>;

/// Builds the automaton of a problem with gap bound `d` (the problem's own
/// bound when `None`). Goals are desugared first, which adds a variable.
pub fn problem_automaton(
    problem: &PlanningProblem,
    d: Option<u64>,
    policy: Policy,
) -> Result<(Universe, ProblemAutomaton), BuildError> {
    let problem = crate::lang::desugar_problem(problem);
    let universe = Universe::new(&problem.variables)?;
    let d = d.unwrap_or_else(|| gap_bound(&problem));
    let tv = TvAutomaton::new(&universe, d);
    let rules = RuleAutomaton::new(&problem, &universe, d, policy)?;
    Ok((universe, intersect(tv, rules).expect("same universe")))
}

/// `TV ∩ (S_S ∪ ¬S_D)`: closed plans that respect the variables and either
/// satisfy the system rules or violate the domain rules.
pub type GameAutomaton = Product<TvAutomaton, Product<RuleAutomaton, Complement<RuleAutomaton>>>;

pub struct GameAutomata {
    /// The game after goal desugaring.
    pub game: Game,
    pub universe: Universe,
    pub d: u64,
    pub automaton: GameAutomaton,
}

impl GameAutomata {
    pub fn system(&self) -> &RuleAutomaton {
        self.automaton.right().left()
    }

    pub fn domain(&self) -> &RuleAutomaton {
        self.automaton.right().right().inner()
    }

    pub fn tv(&self) -> &TvAutomaton {
        self.automaton.left()
    }
}

pub fn game_automaton(game: &Game, policy: Policy) -> Result<GameAutomata, BuildError> {
    let game = desugar_goals(game);
    let vars: Vec<StateVariable> = game.variables().cloned().collect();
    let universe = Universe::new(&vars)?;
    let system = game.system_problem();
    let domain = game.domain_problem();
    let d = gap_bound(&system).max(gap_bound(&domain));
    let tv = TvAutomaton::new(&universe, d);
    let s = RuleAutomaton::new(&system, &universe, d, policy)?;
    let dom = RuleAutomaton::new(&domain, &universe, d, policy)?;
    let automaton = intersect(tv, union(s, complement(dom)).expect("same universe")).expect("same universe");
    Ok(GameAutomata { game, universe, d, automaton })
}
