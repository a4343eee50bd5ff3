//! Controller synthesis for timeline-based games.
//!
//! A game specification is parsed ([`lang`]), each rule set is compiled to
//! a deterministic automaton over events ([`dbm`], [`automaton`]), the
//! automata are combined and split into a two-player arena ([`arena`]), and
//! the reachability game on the arena is solved by attractor computation
//! ([`solver`]). [`oracle`] is an independent brute-force semantics used to
//! cross-check the construction.

pub mod arena;
pub mod automaton;
pub mod dbm;
pub mod gen;
pub mod io;
pub mod lang;
pub mod model;
pub mod oracle;
pub mod solver;
