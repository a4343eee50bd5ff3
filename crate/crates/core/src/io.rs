//! File formats: versioned JSON for plans, strategies, arenas, transcripts
//! and Eve scripts, and Graphviz DOT for automata and arenas.
//!
//! Every JSON document carries `format_version`; documents tied to a game
//! also carry its hash so that a strategy is never replayed on another
//! game. Keys are emitted in a fixed order and states are listed by their
//! stable key, so the same input always produces the same bytes.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arena::{Arena, ArenaMove, MoveJson, Phase};
use crate::automaton::{explore, feasible_symbols, game_automaton, Automaton, BuildError, Explorer, Policy};
use crate::dbm::window;
use crate::lang::{desugar_goals, print_game};
use crate::model::{EventSequence, EveMove, Game, Player, RoundKind};
use crate::solver::{Solution, Strategy, Transcript};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("document was produced for game {found}, this game is {expected}")]
    GameMismatch { expected: String, found: String },
    #[error("unknown state key {0}")]
    UnknownState(String),
    #[error("move {mv} is not available at state {key}")]
    BadMove { key: String, mv: String },
    #[error("{0}")]
    Universe(#[from] crate::automaton::UniverseError),
}

fn check_version(found: u32) -> Result<(), IoError> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(IoError::Version { found })
    }
}

fn check_game(expected: &str, found: &str) -> Result<(), IoError> {
    if expected == found {
        Ok(())
    } else {
        Err(IoError::GameMismatch { expected: expected.into(), found: found.into() })
    }
}

/// sha256 of the printed, goal-desugared game, hex, first 16 bytes.
pub fn game_hash(game: &Game) -> String {
    let text = print_game(&desugar_goals(game));
    hex::encode(&Sha256::digest(text.as_bytes())[..16])
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFile {
    pub format_version: u32,
    pub plan: EventSequence,
}

pub fn write_plan(plan: &EventSequence) -> String {
    to_json(&PlanFile { format_version: FORMAT_VERSION, plan: plan.clone() })
}

pub fn read_plan(text: &str) -> Result<EventSequence, IoError> {
    let file: PlanFile = serde_json::from_str(text)?;
    check_version(file.format_version)?;
    Ok(file.plan)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFile {
    pub format_version: u32,
    pub moves: Vec<EveMove>,
}

pub fn read_script(text: &str) -> Result<Vec<EveMove>, IoError> {
    let file: ScriptFile = serde_json::from_str(text)?;
    check_version(file.format_version)?;
    Ok(file.moves)
}

pub fn write_script(moves: &[EveMove]) -> String {
    to_json(&ScriptFile { format_version: FORMAT_VERSION, moves: moves.to_vec() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub format_version: u32,
    pub game_hash: String,
    pub d: u64,
    pub window_system: u64,
    pub window_domain: u64,
    pub charlie_wins: bool,
    pub initial: String,
    pub arena_states: usize,
    pub winning_states: usize,
    pub stationary_index: usize,
    pub moves: Vec<StrategyEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyEntry {
    pub state: String,
    pub level: u32,
    #[serde(rename = "move")]
    pub mv: MoveJson,
    /// The move as a game-level round move, when the state starts a round.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub round_move: Option<String>,
}

/// Charlie's part of a round as the game sees it: an empty ending play
/// is `wait(1)`.
fn round_move(arena: &Arena, q: usize, mv: &ArenaMove) -> Option<String> {
    let kind = match arena.node(q).phase {
        Phase::Base if q != arena.initial() => RoundKind::Ending,
        Phase::AfterEveEnd { .. } => RoundKind::Starting,
        _ => return None,
    };
    Some(arena.charlie_move_of(kind, mv).to_string())
}

pub fn strategy_file(s: &Solution) -> StrategyFile {
    let game = s.arena.game();
    let mut moves: Vec<StrategyEntry> = s
        .strategy
        .moves
        .iter()
        .map(|(&q, mv)| StrategyEntry {
            state: s.arena.key(q),
            level: s.attractor.level[q].expect("strategy states are winning"),
            mv: s.arena.move_json(mv),
            round_move: round_move(&s.arena, q, mv),
        })
        .collect();
    moves.sort_by(|a, b| a.state.cmp(&b.state));
    StrategyFile {
        format_version: FORMAT_VERSION,
        game_hash: game_hash(game),
        d: s.arena.d(),
        window_system: window(&game.system_problem()),
        window_domain: window(&game.domain_problem()),
        charlie_wins: s.charlie_wins(),
        initial: s.arena.key(s.arena.initial()),
        arena_states: s.graph.len(),
        winning_states: s.attractor.region_size(),
        stationary_index: s.attractor.stationary_index(),
        moves,
    }
}

pub fn write_strategy(s: &Solution) -> String {
    to_json(&strategy_file(s))
}

/// Reads a strategy for the solved game `s`, checking the game hash and
/// that every move is an edge of the arena.
pub fn read_strategy(s: &Solution, text: &str) -> Result<Strategy, IoError> {
    let file: StrategyFile = serde_json::from_str(text)?;
    check_version(file.format_version)?;
    check_game(&game_hash(s.arena.game()), &file.game_hash)?;
    let ids: HashMap<String, usize> = (0..s.graph.len()).map(|q| (s.arena.key(q), q)).collect();
    let mut moves = BTreeMap::new();
    for entry in &file.moves {
        let &q = ids.get(&entry.state).ok_or_else(|| IoError::UnknownState(entry.state.clone()))?;
        let mv = s.arena.move_from_json(&entry.mv)?;
        if s.graph.step(q, mv).is_none() {
            return Err(IoError::BadMove { key: entry.state.clone(), mv: entry.mv.to_string() });
        }
        moves.insert(q, mv);
    }
    Ok(Strategy { moves })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaFile {
    pub format_version: u32,
    pub game_hash: String,
    pub d: u64,
    pub initial: String,
    pub states: Vec<ArenaStateJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaStateJson {
    pub key: String,
    pub owner: Player,
    #[serde(rename = "final")]
    pub is_final: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<u32>,
    pub edges: Vec<ArenaEdgeJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaEdgeJson {
    #[serde(rename = "move")]
    pub mv: MoveJson,
    pub to: String,
}

pub fn arena_file(s: &Solution) -> ArenaFile {
    let a = &s.arena;
    let mut states: Vec<ArenaStateJson> = (0..s.graph.len())
        .map(|q| ArenaStateJson {
            key: a.key(q),
            owner: s.graph.owner[q],
            is_final: s.graph.finals[q],
            level: s.attractor.level[q],
            edges: s.graph.edges[q].iter().map(|(mv, r)| ArenaEdgeJson { mv: a.move_json(mv), to: a.key(*r) }).collect(),
        })
        .collect();
    states.sort_by(|x, y| x.key.cmp(&y.key));
    ArenaFile {
        format_version: FORMAT_VERSION,
        game_hash: game_hash(a.game()),
        d: a.d(),
        initial: a.key(a.initial()),
        states,
    }
}

pub fn write_arena(s: &Solution) -> String {
    to_json(&arena_file(s))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub format_version: u32,
    pub game_hash: String,
    #[serde(flatten)]
    pub transcript: Transcript,
}

pub fn write_transcript(game: &Game, t: &Transcript) -> String {
    to_json(&TranscriptFile { format_version: FORMAT_VERSION, game_hash: game_hash(game), transcript: t.clone() })
}

pub fn read_transcript(game: &Game, text: &str) -> Result<Transcript, IoError> {
    let file: TranscriptFile = serde_json::from_str(text)?;
    check_version(file.format_version)?;
    check_game(&game_hash(game), &file.game_hash)?;
    Ok(file.transcript)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// The explored arena: boxes for Charlie, diamonds for Eve, double borders
/// for final states, filled states in the winning region.
pub fn arena_dot(s: &Solution) -> String {
    let a = &s.arena;
    let mut out = String::from("digraph arena {\n  rankdir=LR;\n  node [fontsize=10];\n  edge [fontsize=9];\n");
    for q in 0..s.graph.len() {
        let shape = match s.graph.owner[q] {
            Player::Charlie => "box",
            Player::Eve => "diamond",
        };
        let mut attrs = format!("shape={shape}");
        if s.graph.finals[q] {
            attrs.push_str(", peripheries=2");
        }
        if let Some(l) = s.attractor.level[q] {
            let _ = write!(attrs, ", style=filled, fillcolor=\"#d8f0d8\", xlabel={}", quote(&l.to_string()));
        }
        let _ = writeln!(out, "  s{q} [label={}, {attrs}];", quote(&a.describe(q)));
    }
    for q in 0..s.graph.len() {
        for (mv, r) in &s.graph.edges[q] {
            let bold = if s.strategy.moves.get(&q) == Some(mv) { ", penwidth=2" } else { "" };
            let _ = writeln!(out, "  s{q} -> s{r} [label={}{bold}];", quote(&a.label(mv)));
        }
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("automaton exceeds {0} states")]
    Budget(usize),
}

/// The game automaton restricted to events the variables allow, explored
/// breadth-first. Accepting states have double circles.
pub fn automaton_dot(game: &Game, policy: Policy, max_states: usize) -> Result<String, ExportError> {
    let automata = game_automaton(game, policy)?;
    let d = automata.d;
    let universe = automata.universe.clone();
    let tv = automata.tv().clone();
    let mut explorer = Explorer::new(automata.automaton);
    let stats = explore(&mut explorer, |q| feasible_symbols(&tv, &q.0, d), max_states);
    if stats.truncated {
        return Err(ExportError::Budget(max_states));
    }
    let mut out = String::from("digraph automaton {\n  rankdir=LR;\n  node [shape=circle, fontsize=10];\n  edge [fontsize=9];\n");
    for q in 0..explorer.state_count() {
        let shape = if explorer.automaton().is_accepting(explorer.state(q)) { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  q{q} [shape={shape}];");
    }
    for (q, sym, r) in explorer.transitions() {
        let _ = writeln!(out, "  q{q} -> q{r} [label={}];", quote(&universe.display_symbol(&sym)));
    }
    out.push_str("}\n");
    Ok(out)
}
