//! The two-player arena of a game.
//!
//! Every event `(A, δ)` the game automaton can read is split into the
//! moves of one ending round and one starting round:
//!
//! ```text
//! δ = 1:  q --play(A_C^e)--> · --play(A_E^e)--> · --play(A_C^s)--> · --play(A_E^s)--> q'
//! δ > 1:  q --wait(δ_C)----> · --play(δ, A_E^e)-> · --play(A_C^s)--> · --play(A_E^s)--> q'
//! ```
//!
//! Events with `δ > 1` that contain an end played by Charlie are removed;
//! they are read as an empty event of length `δ - 1` followed by the
//! event itself with delay 1. After `wait(δ_C)` Eve may answer with any
//! `δ ≤ δ_C`, including 1. Only events after which the plan can still be
//! closed while respecting every variable get edges: neither player may
//! overrun a duration, use a forbidden transition, or make either of these
//! unavoidable.
//!
//! A state after Eve's ending play is final when the event it completes
//! (with no starts) is accepted: this is the moment the game round that
//! closes the plan ends.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::automaton::{
    can_close, feasible_symbols, game_automaton, Automaton, BuildError, Explorer, GameAutomaton, Policy, RuleState, Symbol,
    TvState, Universe, UniverseError,
};
use crate::model::{
    Action, CharlieMove, Endpoint, Event, EventSequence, EveMove, Game, Player, Round, RoundKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArenaMove {
    Wait(u64),
    Play(u128),
    PlayTimed(u64, u128),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Base,
    AfterCharlieEnd { ends: u128 },
    AfterWait { wait: u64 },
    AfterEveEnd { delay: u64, ends: u128 },
    AfterCharlieStart { delay: u64, ends: u128, starts: u128 },
}

/// An arena state: a state of the game automaton (by explorer id) and how
/// far into the next event the players are.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub base: usize,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, Default)]
struct Masks {
    charlie_end: u128,
    eve_end: u128,
    charlie_start: u128,
    eve_start: u128,
}

impl Masks {
    fn ends(&self) -> u128 {
        self.charlie_end | self.eve_end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("arena exploration exceeded {limit} states")]
pub struct BudgetExceeded {
    pub limit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("move {index} ({label}) is not available")]
pub struct Undefined {
    /// 0-based index of the first move without an edge.
    pub index: usize,
    pub label: String,
}

pub struct Arena {
    game: Game,
    universe: Universe,
    d: u64,
    explorer: Explorer<GameAutomaton>,
    masks: Masks,
    nodes: Vec<Node>,
    ids: HashMap<Node, usize>,
    edges: Vec<Option<Vec<(ArenaMove, usize)>>>,
    events: HashMap<usize, Vec<Symbol>>,
    live: HashMap<TvState, bool>,
    finals: Vec<Option<bool>>,
}

impl Arena {
    /// Builds the (lazy) arena of a game. Goals are desugared first.
    pub fn new(game: &Game, policy: Policy) -> Result<Arena, BuildError> {
        let automata = game_automaton(game, policy)?;
        let mut masks = Masks::default();
        for action in automata.universe.actions() {
            let bit = 1u128 << automata.universe.bit_of(&action)?;
            let mask = match (automata.game.owner_of(&action), action.kind) {
                (Some(Player::Charlie), Endpoint::End) => &mut masks.charlie_end,
                (Some(Player::Eve), Endpoint::End) => &mut masks.eve_end,
                (Some(Player::Charlie), Endpoint::Start) => &mut masks.charlie_start,
                (Some(Player::Eve), Endpoint::Start) => &mut masks.eve_start,
                (None, _) => unreachable!("actions come from the game's variables"),
            };
            *mask |= bit;
        }
        let mut arena = Arena {
            game: automata.game,
            universe: automata.universe,
            d: automata.d,
            explorer: Explorer::new(automata.automaton),
            masks,
            nodes: Vec::new(),
            ids: HashMap::new(),
            edges: Vec::new(),
            events: HashMap::new(),
            live: HashMap::new(),
            finals: Vec::new(),
        };
        let root = arena.explorer.initial();
        arena.intern(Node { base: root, phase: Phase::Base });
        Ok(arena)
    }

    /// The desugared game the arena was built from.
    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn automaton(&self) -> &GameAutomaton {
        self.explorer.automaton()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> Node {
        self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Game automaton states met so far.
    pub fn automaton_states(&self) -> usize {
        self.explorer.state_count()
    }

    pub fn base_state(&self, id: usize) -> &<GameAutomaton as Automaton>::State {
        self.explorer.state(self.nodes[id].base)
    }

    fn intern(&mut self, node: Node) -> usize {
        if let Some(&id) = self.ids.get(&node) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(node);
        self.ids.insert(node, id);
        self.edges.push(None);
        self.finals.push(None);
        id
    }

    pub fn owner(&self, id: usize) -> Player {
        match self.nodes[id].phase {
            Phase::Base | Phase::AfterEveEnd { .. } => Player::Charlie,
            _ => Player::Eve,
        }
    }

    /// Whether the game automaton, from `base`, reads `(A, δ)` under the
    /// pruning rule.
    pub fn prune_allows(&self, symbol: &Symbol) -> bool {
        symbol.delay == 1 || symbol.actions & self.masks.charlie_end == 0
    }

    /// Events with an edge out of `base`: the feasible events of the
    /// token-validity component that keep a closed plan reachable, minus
    /// the pruned ones.
    fn events(&mut self, base: usize) -> &[Symbol] {
        if !self.events.contains_key(&base) {
            let tv = self.explorer.automaton().left();
            let state = self.explorer.state(base).0.clone();
            let mut list = Vec::new();
            for s in feasible_symbols(tv, &state, self.d) {
                if !self.prune_allows(&s) {
                    continue;
                }
                let next = tv.step(&state, &s);
                let live = *self.live.entry(next).or_insert_with_key(|q| can_close(tv, q));
                if live {
                    list.push(s);
                }
            }
            self.events.insert(base, list);
        }
        &self.events[&base]
    }

    fn is_tv_initial(&self, base: usize) -> bool {
        let tv = self.explorer.automaton().left();
        self.explorer.state(base).0 == tv.initial() && !matches!(tv.initial(), TvState::Vars(ref v) if v.is_empty())
    }

    /// Outgoing edges in canonical move order.
    pub fn edges(&mut self, id: usize) -> Vec<(ArenaMove, usize)> {
        if let Some(e) = &self.edges[id] {
            return e.clone();
        }
        let Node { base, phase } = self.nodes[id];
        let m = self.masks;
        let events = self.events(base).to_vec();
        let mut moves: BTreeSet<(ArenaMove, Node)> = BTreeSet::new();
        let at = |phase| Node { base, phase };
        match phase {
            Phase::Base => {
                for s in events.iter().filter(|s| s.delay == 1) {
                    let ends = s.actions & m.charlie_end;
                    moves.insert((ArenaMove::Play(ends), at(Phase::AfterCharlieEnd { ends })));
                }
                if !self.is_tv_initial(base) {
                    for wait in 2..=self.d {
                        if events.iter().any(|s| s.delay <= wait && s.actions & m.charlie_end == 0) {
                            moves.insert((ArenaMove::Wait(wait), at(Phase::AfterWait { wait })));
                        }
                    }
                }
            }
            Phase::AfterCharlieEnd { ends } => {
                for s in events.iter().filter(|s| s.delay == 1 && s.actions & m.charlie_end == ends) {
                    let eve = s.actions & m.eve_end;
                    moves.insert((ArenaMove::Play(eve), at(Phase::AfterEveEnd { delay: 1, ends: ends | eve })));
                }
            }
            Phase::AfterWait { wait } => {
                for s in events.iter().filter(|s| s.delay <= wait && s.actions & m.charlie_end == 0) {
                    let eve = s.actions & m.eve_end;
                    let next = at(Phase::AfterEveEnd { delay: s.delay, ends: eve });
                    moves.insert((ArenaMove::PlayTimed(s.delay, eve), next));
                }
            }
            Phase::AfterEveEnd { delay, ends } => {
                for s in events.iter().filter(|s| s.delay == delay && s.actions & m.ends() == ends) {
                    let starts = s.actions & m.charlie_start;
                    moves.insert((ArenaMove::Play(starts), at(Phase::AfterCharlieStart { delay, ends, starts })));
                }
            }
            Phase::AfterCharlieStart { delay, ends, starts } => {
                let known = m.ends() | m.charlie_start;
                for s in events.iter().filter(|s| s.delay == delay && s.actions & known == ends | starts) {
                    let eve = s.actions & m.eve_start;
                    let target = self.explorer.step(base, *s);
                    moves.insert((ArenaMove::Play(eve), Node { base: target, phase: Phase::Base }));
                }
            }
        }
        let out: Vec<(ArenaMove, usize)> = moves.into_iter().map(|(mv, node)| (mv, self.intern(node))).collect();
        self.edges[id] = Some(out.clone());
        out
    }

    pub fn step(&mut self, id: usize, mv: ArenaMove) -> Option<usize> {
        self.edges(id).into_iter().find(|(m, _)| *m == mv).map(|(_, to)| to)
    }

    /// Final states: accepting automaton states, and states after Eve's
    /// ending play whose event, completed without starts, is accepted.
    pub fn is_final(&mut self, id: usize) -> bool {
        if let Some(f) = self.finals[id] {
            return f;
        }
        let Node { base, phase } = self.nodes[id];
        let f = match phase {
            Phase::Base => self.explorer.is_accepting(base),
            Phase::AfterEveEnd { delay, ends } => {
                let q = self.explorer.step(base, Symbol::new(ends, delay));
                self.explorer.is_accepting(q)
            }
            _ => false,
        };
        self.finals[id] = Some(f);
        f
    }

    /// The state reached by a sequence of moves from the initial state.
    pub fn read_play(&mut self, moves: &[ArenaMove]) -> Result<usize, Undefined> {
        let mut q = self.initial();
        for (index, mv) in moves.iter().enumerate() {
            q = self.step(q, *mv).ok_or_else(|| Undefined { index, label: self.label(mv) })?;
        }
        Ok(q)
    }

    /// Explores every reachable state.
    pub fn explore(&mut self, limit: usize) -> Result<usize, BudgetExceeded> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([self.initial()]);
        seen[self.initial()] = true;
        while let Some(q) = queue.pop_front() {
            for (_, r) in self.edges(q) {
                if r >= seen.len() {
                    seen.resize(self.len(), false);
                }
                if !seen[r] {
                    if self.len() > limit {
                        return Err(BudgetExceeded { limit });
                    }
                    seen[r] = true;
                    queue.push_back(r);
                }
            }
            self.is_final(q);
        }
        Ok(self.len())
    }

    /// Edges of every explored state, for the solver; states whose edges
    /// were never computed have none.
    pub fn edge_lists(&self) -> Vec<Vec<(ArenaMove, usize)>> {
        self.edges.iter().map(|e| e.clone().unwrap_or_default()).collect()
    }

    pub fn finals(&mut self) -> Vec<bool> {
        (0..self.len()).map(|q| self.is_final(q)).collect()
    }

    fn actions(&self, mask: u128) -> String {
        let names: Vec<String> = self.universe.decode_actions(mask).iter().map(Action::to_string).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Canonical rendering of a move, also used to break ties.
    pub fn label(&self, mv: &ArenaMove) -> String {
        match *mv {
            ArenaMove::Wait(d) => format!("wait({d})"),
            ArenaMove::Play(a) => format!("play({})", self.actions(a)),
            ArenaMove::PlayTimed(d, a) => format!("play({d}, {})", self.actions(a)),
        }
    }

    pub fn move_json(&self, mv: &ArenaMove) -> MoveJson {
        match *mv {
            ArenaMove::Wait(d) => MoveJson::Wait { delay: d },
            ArenaMove::Play(a) => MoveJson::Play { actions: self.universe.decode_actions(a) },
            ArenaMove::PlayTimed(d, a) => MoveJson::PlayTimed { delay: d, actions: self.universe.decode_actions(a) },
        }
    }

    pub fn move_from_json(&self, mv: &MoveJson) -> Result<ArenaMove, UniverseError> {
        Ok(match mv {
            MoveJson::Wait { delay } => ArenaMove::Wait(*delay),
            MoveJson::Play { actions } => ArenaMove::Play(self.universe.encode_actions(actions)?),
            MoveJson::PlayTimed { delay, actions } => {
                ArenaMove::PlayTimed(*delay, self.universe.encode_actions(actions)?)
            }
        })
    }

    /// Stable key of a state: a hash of its structure, independent of the
    /// order in which states were explored.
    pub fn key(&self, id: usize) -> String {
        let node = self.nodes[id];
        let text = format!("{:?}|{:?}", self.explorer.state(node.base), node.phase);
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    /// Short description of a state for DOT and the interactive mode.
    pub fn describe(&self, id: usize) -> String {
        let node = self.nodes[id];
        let (tv, (s, d)) = self.explorer.state(node.base);
        let rules = |r: &RuleState| match r {
            RuleState::Sink => "⊥".to_string(),
            RuleState::Live(l) => format!("{}/{}", l.structures.len(), l.pending.len() + l.aged.len()),
        };
        let tv = match tv {
            TvState::Sink => "sink".to_string(),
            TvState::Vars(v) => format!("{v:?}"),
        };
        let phase = match node.phase {
            Phase::Base => "base".to_string(),
            Phase::AfterCharlieEnd { ends } => format!("after C end {}", self.actions(ends)),
            Phase::AfterWait { wait } => format!("after wait({wait})"),
            Phase::AfterEveEnd { delay, ends } => format!("after E end δ={delay} {}", self.actions(ends)),
            Phase::AfterCharlieStart { delay, ends, starts } => {
                format!("after C start δ={delay} {} {}", self.actions(ends), self.actions(starts))
            }
        };
        format!("q{} {phase}; S {}; D {}; {tv}", node.base, rules(s), rules(d))
    }

    /// Moves completing the previous event before a round of kind `kind`:
    /// the empty ending plays of the first event before the first round,
    /// and empty starting plays between two ending rounds.
    pub fn prefix_moves(prev: Option<RoundKind>, kind: RoundKind) -> Vec<ArenaMove> {
        match (prev, kind) {
            (None, RoundKind::Starting) | (Some(RoundKind::Ending), RoundKind::Ending) => {
                vec![ArenaMove::Play(0), ArenaMove::Play(0)]
            }
            _ => vec![],
        }
    }

    /// Charlie's arena move for a game move: `wait(1)` is the empty
    /// ending play, and waits longer than `d` are read as `wait(d)`.
    pub fn charlie_arena_move(&self, charlie: &CharlieMove) -> Result<ArenaMove, UniverseError> {
        Ok(match charlie {
            CharlieMove::Play(a) => ArenaMove::Play(self.universe.encode_actions(a)?),
            CharlieMove::Wait(w) if (*w).min(self.d) <= 1 => ArenaMove::Play(0),
            CharlieMove::Wait(w) => ArenaMove::Wait((*w).min(self.d)),
        })
    }

    pub fn eve_arena_move(&self, round: &Round) -> Result<ArenaMove, UniverseError> {
        let eve = self.universe.encode_actions(round.eve_actions())?;
        Ok(match (round.charlie(), round.eve()) {
            (CharlieMove::Wait(w), EveMove::PlayTimed(delay, _)) if (*w).min(self.d) > 1 => {
                ArenaMove::PlayTimed(*delay, eve)
            }
            _ => ArenaMove::Play(eve),
        })
    }

    pub fn round_moves(&self, prev: Option<RoundKind>, round: &Round) -> Result<Vec<ArenaMove>, UniverseError> {
        let mut out = Self::prefix_moves(prev, round.kind());
        out.push(self.charlie_arena_move(round.charlie())?);
        out.push(self.eve_arena_move(round)?);
        Ok(out)
    }

    /// Translates a play into arena moves, round by round.
    pub fn moves_of_rounds(&self, rounds: &[Round]) -> Result<Vec<ArenaMove>, UniverseError> {
        let mut out = Vec::new();
        let mut prev = None;
        for round in rounds {
            out.extend(self.round_moves(prev, round)?);
            prev = Some(round.kind());
        }
        Ok(out)
    }

    /// Game-level reading of Charlie's move at the start of a round of
    /// kind `kind`.
    pub fn charlie_move_of(&self, kind: RoundKind, mv: &ArenaMove) -> CharlieMove {
        match *mv {
            ArenaMove::Wait(d) => CharlieMove::Wait(d),
            ArenaMove::Play(0) if kind == RoundKind::Ending => CharlieMove::Wait(1),
            ArenaMove::Play(a) | ArenaMove::PlayTimed(_, a) => {
                CharlieMove::Play(self.universe.decode_actions(a).into_iter().collect())
            }
        }
    }

    /// Game-level reading of an Eve move following Charlie's `charlie`.
    pub fn eve_move_of(&self, charlie: &CharlieMove, mv: &ArenaMove) -> EveMove {
        let set = |a: u128| self.universe.decode_actions(a).into_iter().collect();
        match (*mv, charlie) {
            (ArenaMove::PlayTimed(d, a), _) => EveMove::PlayTimed(d, set(a)),
            (ArenaMove::Play(a), CharlieMove::Wait(_)) => EveMove::PlayTimed(1, set(a)),
            (ArenaMove::Play(a), CharlieMove::Play(_)) => EveMove::Play(set(a)),
            (ArenaMove::Wait(_), _) => unreachable!("Eve never waits"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum MoveJson {
    Wait { delay: u64 },
    Play { actions: Vec<Action> },
    PlayTimed { delay: u64, actions: Vec<Action> },
}

impl fmt::Display for MoveJson {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |a: &[Action]| a.iter().map(Action::to_string).collect::<Vec<_>>().join(", ");
        match self {
            MoveJson::Wait { delay } => write!(f, "wait({delay})"),
            MoveJson::Play { actions } => write!(f, "play({{{}}})", list(actions)),
            MoveJson::PlayTimed { delay, actions } => write!(f, "play({delay}, {{{}}})", list(actions)),
        }
    }
}

/// Splits every event with `δ > 1` that contains an end played by Charlie
/// into an empty event of length `δ - 1` and the event itself with delay 1.
pub fn unit_end_renormalize(seq: &EventSequence, game: &Game) -> EventSequence {
    let mut out = Vec::with_capacity(seq.events.len());
    for (i, e) in seq.events.iter().enumerate() {
        let charlie_end = e.ends().any(|a| game.owner_of(a) == Some(Player::Charlie));
        if i > 0 && e.delay > 1 && charlie_end {
            out.push(Event::empty(e.delay - 1));
            out.push(Event { actions: e.actions.clone(), delay: 1 });
        } else {
            out.push(e.clone());
        }
    }
    out.into()
}

/// Runs the pruned automaton: `None` when some transition is removed.
pub fn accepts_pruned(arena: &mut Arena, seq: &EventSequence) -> Result<Option<bool>, UniverseError> {
    let word = arena.universe.encode(seq, arena.d)?;
    let mut q = arena.explorer.initial();
    for s in word {
        if !arena.prune_allows(&s) {
            return Ok(None);
        }
        q = arena.explorer.step(q, s);
    }
    Ok(Some(arena.explorer.is_accepting(q)))
}

/// Runs the unpruned game automaton.
pub fn accepts_game(arena: &mut Arena, seq: &EventSequence) -> Result<bool, UniverseError> {
    let word = arena.universe.encode(seq, arena.d)?;
    let q = word.into_iter().fold(arena.explorer.initial(), |q, s| arena.explorer.step(q, s));
    Ok(arena.explorer.is_accepting(q))
}
