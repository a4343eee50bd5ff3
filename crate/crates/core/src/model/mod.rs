//! Variables, plans, games and rounds.

pub mod discipline;
pub mod events;
pub mod game;
pub mod rounds;

pub use discipline::{can_still_close, check_discipline, Undisciplined};
pub use events::{
    denormalize, duration, elapsed, is_closed, normalize_gaps, openness, timestamps, validate_event_sequence,
    Condition, Event, EventSequence, Openness, Violation,
};
pub use game::{
    Action, Atom, Endpoint, Game, ModelError, PlanningProblem, Player, Quantifier, Rule, StateVariable, Statement,
    Tag, Term, Upper, Value,
};
pub use rounds::{apply_round, open_for_all, play_outcome, CharlieMove, EveMove, NotApplicable, Round, RoundError, RoundKind};
