use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use serde::Serialize;

use super::{Symbol, Universe, UniverseError};
use crate::model::EventSequence;

/// What an automaton reads: the actions of a universe and delays `1..=d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Alphabet {
    pub actions: Vec<String>,
    pub d: u64,
}

impl Alphabet {
    pub fn of(universe: &Universe, d: u64) -> Self {
        Alphabet { actions: universe.actions().iter().map(|a| a.to_string()).collect(), d }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("alphabet mismatch: {left} actions with d = {left_d} against {right} actions with d = {right_d}")]
pub struct AlphabetMismatch {
    pub left: usize,
    pub left_d: u64,
    pub right: usize,
    pub right_d: u64,
}

/// A deterministic, complete automaton whose states are computed lazily.
pub trait Automaton {
    type State: Clone + Eq + Hash + Ord + Debug;

    fn alphabet(&self) -> &Alphabet;
    fn initial(&self) -> Self::State;
    fn step(&self, state: &Self::State, symbol: &Symbol) -> Self::State;
    fn is_accepting(&self, state: &Self::State) -> bool;

    /// True when no word leads from `state` to acceptance. Only a
    /// conservative hint: `false` is always correct.
    fn is_dead(&self, _state: &Self::State) -> bool {
        false
    }

    fn run<'a>(&self, word: impl IntoIterator<Item = &'a Symbol>) -> Self::State {
        word.into_iter().fold(self.initial(), |q, s| self.step(&q, s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductOp {
    And,
    Or,
}

#[derive(Clone, Debug)]
pub struct Product<A, B> {
    left: A,
    right: B,
    op: ProductOp,
}

impl<A, B> Product<A, B> {
    pub fn left(&self) -> &A {
        &self.left
    }

    pub fn right(&self) -> &B {
        &self.right
    }

    pub fn op(&self) -> ProductOp {
        self.op
    }
}

fn check<A: Automaton, B: Automaton>(a: &A, b: &B) -> Result<(), AlphabetMismatch> {
    let (x, y) = (a.alphabet(), b.alphabet());
    if x == y {
        Ok(())
    } else {
        Err(AlphabetMismatch { left: x.actions.len(), left_d: x.d, right: y.actions.len(), right_d: y.d })
    }
}

pub fn intersect<A: Automaton, B: Automaton>(left: A, right: B) -> Result<Product<A, B>, AlphabetMismatch> {
    check(&left, &right)?;
    Ok(Product { left, right, op: ProductOp::And })
}

pub fn union<A: Automaton, B: Automaton>(left: A, right: B) -> Result<Product<A, B>, AlphabetMismatch> {
    check(&left, &right)?;
    Ok(Product { left, right, op: ProductOp::Or })
}

impl<A: Automaton, B: Automaton> Automaton for Product<A, B> {
    type State = (A::State, B::State);

    fn alphabet(&self) -> &Alphabet {
        self.left.alphabet()
    }

    fn initial(&self) -> Self::State {
        (self.left.initial(), self.right.initial())
    }

    fn step(&self, (p, q): &Self::State, symbol: &Symbol) -> Self::State {
        (self.left.step(p, symbol), self.right.step(q, symbol))
    }

    fn is_accepting(&self, (p, q): &Self::State) -> bool {
        match self.op {
            ProductOp::And => self.left.is_accepting(p) && self.right.is_accepting(q),
            ProductOp::Or => self.left.is_accepting(p) || self.right.is_accepting(q),
        }
    }

    fn is_dead(&self, (p, q): &Self::State) -> bool {
        match self.op {
            ProductOp::And => self.left.is_dead(p) || self.right.is_dead(q),
            ProductOp::Or => self.left.is_dead(p) && self.right.is_dead(q),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Complement<A>(A);

impl<A> Complement<A> {
    pub fn inner(&self) -> &A {
        &self.0
    }
}

pub fn complement<A: Automaton>(a: A) -> Complement<A> {
    Complement(a)
}

impl<A: Automaton> Automaton for Complement<A> {
    type State = A::State;

    fn alphabet(&self) -> &Alphabet {
        self.0.alphabet()
    }

    fn initial(&self) -> A::State {
        self.0.initial()
    }

    fn step(&self, state: &A::State, symbol: &Symbol) -> A::State {
        self.0.step(state, symbol)
    }

    fn is_accepting(&self, state: &A::State) -> bool {
        !self.0.is_accepting(state)
    }
}

/// Runs `a` on a plan. The plan's first delay is read as 1; any later
/// delay above the alphabet's bound is an error.
pub fn accepts<A: Automaton>(a: &A, universe: &Universe, plan: &EventSequence) -> Result<bool, UniverseError> {
    let word = universe.encode(plan, a.alphabet().d)?;
    Ok(a.is_accepting(&a.run(&word)))
}

/// Interns the states of an automaton and memoizes its transitions.
pub struct Explorer<A: Automaton> {
    automaton: A,
    states: Vec<A::State>,
    ids: HashMap<A::State, usize>,
    edges: HashMap<(usize, Symbol), usize>,
}

impl<A: Automaton> Explorer<A> {
    pub fn new(automaton: A) -> Self {
        let mut e = Explorer { automaton, states: Vec::new(), ids: HashMap::new(), edges: HashMap::new() };
        let q0 = e.automaton.initial();
        e.intern(q0);
        e
    }

    pub fn automaton(&self) -> &A {
        &self.automaton
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn intern(&mut self, state: A::State) -> usize {
        if let Some(&id) = self.ids.get(&state) {
            return id;
        }
        let id = self.states.len();
        self.states.push(state.clone());
        self.ids.insert(state, id);
        id
    }

    pub fn state(&self, id: usize) -> &A::State {
        &self.states[id]
    }

    pub fn step(&mut self, id: usize, symbol: Symbol) -> usize {
        if let Some(&next) = self.edges.get(&(id, symbol)) {
            return next;
        }
        let next = self.automaton.step(&self.states[id], &symbol);
        let next = self.intern(next);
        self.edges.insert((id, symbol), next);
        next
    }

    pub fn is_accepting(&self, id: usize) -> bool {
        self.automaton.is_accepting(&self.states[id])
    }

    pub fn is_dead(&self, id: usize) -> bool {
        self.automaton.is_dead(&self.states[id])
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Memoized transitions, sorted.
    pub fn transitions(&self) -> Vec<(usize, Symbol, usize)> {
        let mut t: Vec<_> = self.edges.iter().map(|(&(q, s), &r)| (q, s, r)).collect();
        t.sort();
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExploreStats {
    pub states: usize,
    pub edges: usize,
    pub accepting: usize,
    /// True when exploration stopped at the state budget.
    pub truncated: bool,
}

/// Breadth-first exploration from the initial state over the symbols that
/// `symbols` proposes for each state.
pub fn explore<A: Automaton>(
    explorer: &mut Explorer<A>,
    mut symbols: impl FnMut(&A::State) -> Vec<Symbol>,
    max_states: usize,
) -> ExploreStats {
    let mut seen = vec![false; explorer.state_count()];
    let mut queue = VecDeque::from([explorer.initial()]);
    seen[explorer.initial()] = true;
    let mut stats = ExploreStats::default();
    while let Some(q) = queue.pop_front() {
        if stats.states >= max_states {
            stats.truncated = true;
            break;
        }
        stats.states += 1;
        stats.accepting += explorer.is_accepting(q) as usize;
        for s in symbols(explorer.state(q)) {
            let r = explorer.step(q, s);
            stats.edges += 1;
            if r >= seen.len() {
                seen.resize(r + 1, false);
            }
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
    }
    stats
}
