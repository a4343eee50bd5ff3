use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::events::{openness, validate_event_sequence, Event, EventSequence, Violation};
use super::game::{Action, Endpoint, Game, Player};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharlieMove {
    Wait(u64),
    Play(BTreeSet<Action>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveMove {
    Play(BTreeSet<Action>),
    PlayTimed(u64, BTreeSet<Action>),
}

impl EveMove {
    pub fn actions(&self) -> &BTreeSet<Action> {
        match self {
            EveMove::Play(a) | EveMove::PlayTimed(_, a) => a,
        }
    }
}

pub(crate) fn fmt_actions(f: &mut fmt::Formatter<'_>, actions: &BTreeSet<Action>) -> fmt::Result {
    f.write_str("{")?;
    for (i, a) in actions.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str("}")
}

impl fmt::Display for CharlieMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CharlieMove::Wait(d) => write!(f, "wait({d})"),
            CharlieMove::Play(a) => {
                f.write_str("play(")?;
                fmt_actions(f, a)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for EveMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EveMove::Play(a) => {
                f.write_str("play(")?;
                fmt_actions(f, a)?;
                f.write_str(")")
            }
            EveMove::PlayTimed(d, a) => {
                write!(f, "play({d}, ")?;
                fmt_actions(f, a)?;
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundKind {
    Starting,
    Ending,
}

fn kind_of(actions: &BTreeSet<Action>) -> Option<Option<RoundKind>> {
    let starts = actions.iter().all(|a| a.kind == Endpoint::Start);
    let ends = actions.iter().all(|a| a.kind == Endpoint::End);
    match (starts, ends) {
        (true, true) => Some(None),
        (true, false) => Some(Some(RoundKind::Starting)),
        (false, true) => Some(Some(RoundKind::Ending)),
        (false, false) => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RoundError {
    #[error("{0}'s move mixes starting and ending actions")]
    Mixed(Player),
    #[error("moves of different kinds")]
    KindMismatch,
    #[error("a wait move must be answered by a timed play")]
    WaitWithoutTimedPlay,
    #[error("a timed play can only answer a wait move")]
    TimedPlayWithoutWait,
    #[error("Eve's delay {eve} exceeds Charlie's wait {charlie}")]
    DelayExceedsWait { eve: u64, charlie: u64 },
    #[error("delays must be positive")]
    ZeroDelay,
}

/// A pair of moves satisfying the round constraints.
///
/// Charlie's empty play is accepted as a starting move: it is the only
/// way to complete a starting round when Charlie has nothing to start.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Round {
    charlie: CharlieMove,
    eve: EveMove,
}

impl Round {
    pub fn new(charlie: CharlieMove, eve: EveMove) -> Result<Round, RoundError> {
        match (&charlie, &eve) {
            (CharlieMove::Play(c), EveMove::Play(e)) => {
                let ck = kind_of(c).ok_or(RoundError::Mixed(Player::Charlie))?;
                let ek = kind_of(e).ok_or(RoundError::Mixed(Player::Eve))?;
                let ck = ck.unwrap_or(RoundKind::Starting);
                if ek.is_some_and(|k| k != ck) {
                    return Err(RoundError::KindMismatch);
                }
            }
            (CharlieMove::Wait(dc), EveMove::PlayTimed(de, e)) => {
                if *dc == 0 || *de == 0 {
                    return Err(RoundError::ZeroDelay);
                }
                if de > dc {
                    return Err(RoundError::DelayExceedsWait { eve: *de, charlie: *dc });
                }
                match kind_of(e) {
                    None => return Err(RoundError::Mixed(Player::Eve)),
                    Some(Some(RoundKind::Starting)) => return Err(RoundError::KindMismatch),
                    _ => {}
                }
            }
            (CharlieMove::Wait(_), EveMove::Play(_)) => return Err(RoundError::WaitWithoutTimedPlay),
            (CharlieMove::Play(_), EveMove::PlayTimed(..)) => return Err(RoundError::TimedPlayWithoutWait),
        }
        Ok(Round { charlie, eve })
    }

    pub fn charlie(&self) -> &CharlieMove {
        &self.charlie
    }

    pub fn eve(&self) -> &EveMove {
        &self.eve
    }

    pub fn kind(&self) -> RoundKind {
        match &self.charlie {
            CharlieMove::Wait(_) => RoundKind::Ending,
            CharlieMove::Play(c) if c.iter().any(|a| a.kind == Endpoint::End) => RoundKind::Ending,
            CharlieMove::Play(_) => RoundKind::Starting,
        }
    }

    pub fn charlie_actions(&self) -> BTreeSet<Action> {
        match &self.charlie {
            CharlieMove::Wait(_) => BTreeSet::new(),
            CharlieMove::Play(a) => a.clone(),
        }
    }

    pub fn eve_actions(&self) -> &BTreeSet<Action> {
        match &self.eve {
            EveMove::Play(a) | EveMove::PlayTimed(_, a) => a,
        }
    }

    /// Delay of the appended event for ending rounds.
    pub fn delay(&self) -> u64 {
        match &self.eve {
            EveMove::Play(_) => 1,
            EveMove::PlayTimed(d, _) => *d,
        }
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.charlie, self.eve)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NotApplicable {
    #[error("{player} does not own action {action}")]
    Ownership { player: Player, action: Action },
    #[error("an ending round needs a plan open on every variable, a starting round the opposite")]
    Alternation,
    #[error("the outcome is not a valid event sequence: {0}")]
    Validity(Violation),
}

/// True when every variable of the game has an open token at the end of `seq`.
pub fn open_for_all(seq: &EventSequence, game: &Game) -> bool {
    !seq.events.is_empty() && game.variables().all(|v| openness(seq, &v.name).is_open_right())
}

/// The outcome of `round` on `seq`, if the round is applicable.
pub fn apply_round(seq: &EventSequence, round: &Round, game: &Game) -> Result<EventSequence, NotApplicable> {
    let check_owner = |player: Player, actions: &BTreeSet<Action>| {
        for action in actions {
            if game.owner_of(action) != Some(player) {
                return Err(NotApplicable::Ownership { player, action: action.clone() });
            }
        }
        Ok(())
    };
    let charlie = round.charlie_actions();
    check_owner(Player::Charlie, &charlie)?;
    check_owner(Player::Eve, round.eve_actions())?;

    let ending = round.kind() == RoundKind::Ending;
    if ending != open_for_all(seq, game) {
        return Err(NotApplicable::Alternation);
    }

    let mut out = seq.clone();
    let actions: BTreeSet<Action> = charlie.union(round.eve_actions()).cloned().collect();
    if ending {
        out.events.push(Event { actions, delay: round.delay() });
    } else {
        match out.events.last_mut() {
            Some(last) => last.actions.extend(actions),
            None => out.events.push(Event { actions, delay: 0 }),
        }
    }
    let vars: Vec<_> = game.variables().cloned().collect();
    validate_event_sequence(&out, &vars).map_err(NotApplicable::Validity)?;
    Ok(out)
}

/// Outcome of a whole play from the empty plan, or the index of the first
/// round that is not applicable.
pub fn play_outcome(rounds: &[Round], game: &Game) -> Result<EventSequence, (usize, NotApplicable)> {
    let mut plan = EventSequence::default();
    for (i, round) in rounds.iter().enumerate() {
        plan = apply_round(&plan, round, game).map_err(|e| (i, e))?;
    }
    Ok(plan)
}
