//! Solving the reachability game on the arena.
//!
//! The attractor of the final states is computed by a backward worklist
//! over the explored arena. [`attractor_naive`] iterates the defining
//! recurrence directly and is kept as a reference. The positional strategy
//! picks, at every winning Charlie state, an edge to the lowest level,
//! breaking ties by the least move label.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{Arena, ArenaMove, BudgetExceeded};
use crate::automaton::{Automaton, BuildError, Policy, RuleAutomaton, RuleState, Universe};
use crate::model::{
    apply_round, open_for_all, CharlieMove, EveMove, EventSequence, Game, Player, Round, RoundKind,
};

/// The explored part of an arena as a plain graph.
#[derive(Clone, Debug)]
pub struct Graph {
    pub owner: Vec<Player>,
    pub finals: Vec<bool>,
    pub edges: Vec<Vec<(ArenaMove, usize)>>,
}

impl Graph {
    pub fn of(arena: &mut Arena) -> Graph {
        let finals = arena.finals();
        let owner = (0..arena.len()).map(|q| arena.owner(q)).collect();
        Graph { owner, finals, edges: arena.edge_lists() }
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn step(&self, q: usize, mv: ArenaMove) -> Option<usize> {
        self.edges[q].iter().find(|(m, _)| *m == mv).map(|&(_, r)| r)
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (q, edges) in self.edges.iter().enumerate() {
            for &(_, r) in edges {
                pred[r].push(q);
            }
        }
        for p in &mut pred {
            p.dedup();
        }
        pred
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttractorResult {
    /// The least `i` with the state in the `i`-th attractor, for states in
    /// the winning region.
    pub level: Vec<Option<u32>>,
    /// Size of each attractor `Attr^0 ⊆ Attr^1 ⊆ …`, up to and including
    /// the first repetition.
    pub layers: Vec<usize>,
}

impl AttractorResult {
    pub fn wins(&self, q: usize) -> bool {
        self.level[q].is_some()
    }

    /// The least `k` with `Attr^k = Attr^{k+1}`.
    pub fn stationary_index(&self) -> usize {
        self.layers.len() - 2
    }

    pub fn region_size(&self) -> usize {
        self.layers.last().copied().unwrap_or(0)
    }
}

/// Backward worklist attractor, one layer at a time.
pub fn attractor(g: &Graph) -> AttractorResult {
    let pred = g.predecessors();
    let mut level: Vec<Option<u32>> = vec![None; g.len()];
    let mut missing: Vec<usize> = g.edges.iter().map(Vec::len).collect();
    let mut frontier: Vec<usize> = (0..g.len()).filter(|&q| g.finals[q]).collect();
    for &q in &frontier {
        level[q] = Some(0);
    }
    let mut layers = vec![frontier.len()];
    // Eve states without moves satisfy the universal clause vacuously.
    let mut vacuous: Vec<usize> =
        (0..g.len()).filter(|&q| !g.finals[q] && g.owner[q] == Player::Eve && g.edges[q].is_empty()).collect();
    let mut i = 0;
    loop {
        let mut next = std::mem::take(&mut vacuous);
        for &r in &frontier {
            for &q in &pred[r] {
                if level[q].is_some() {
                    continue;
                }
                match g.owner[q] {
                    Player::Charlie => {
                        level[q] = Some(i + 1);
                        next.push(q);
                    }
                    Player::Eve => {
                        missing[q] -= g.edges[q].iter().filter(|&&(_, t)| t == r).count();
                        if missing[q] == 0 {
                            level[q] = Some(i + 1);
                            next.push(q);
                        }
                    }
                }
            }
        }
        for &q in &next {
            level[q] = Some(i + 1);
        }
        if next.is_empty() {
            break;
        }
        layers.push(layers[i as usize] + next.len());
        frontier = next;
        i += 1;
    }
    let last = *layers.last().unwrap();
    layers.push(last);
    AttractorResult { level, layers }
}

/// The recurrence as written: `Attr^{i+1}` from `Attr^i` over every state,
/// until two consecutive sets coincide.
pub fn attractor_naive(g: &Graph) -> AttractorResult {
    let mut inside: Vec<bool> = g.finals.clone();
    let mut level: Vec<Option<u32>> = inside.iter().map(|&f| f.then_some(0)).collect();
    let mut layers = vec![inside.iter().filter(|&&b| b).count()];
    for i in 1.. {
        let next: Vec<bool> = (0..g.len())
            .map(|q| {
                inside[q]
                    || match g.owner[q] {
                        Player::Charlie => g.edges[q].iter().any(|&(_, r)| inside[r]),
                        Player::Eve => g.edges[q].iter().all(|&(_, r)| inside[r]),
                    }
            })
            .collect();
        for q in 0..g.len() {
            if next[q] && !inside[q] {
                level[q] = Some(i);
            }
        }
        layers.push(next.iter().filter(|&&b| b).count());
        if next == inside {
            break;
        }
        inside = next;
    }
    AttractorResult { level, layers }
}

/// A positional strategy: a move for every non-final Charlie state of the
/// winning region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub moves: BTreeMap<usize, ArenaMove>,
}

/// Among the edges of `q` into the winning region, the ones reaching the
/// lowest level, least label first.
fn best_edge(arena: &Arena, g: &Graph, attr: &AttractorResult, q: usize) -> Option<(ArenaMove, usize)> {
    g.edges[q]
        .iter()
        .filter_map(|&(m, r)| attr.level[r].map(|l| (l, arena.label(&m), m, r)))
        .min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)))
        .map(|(_, _, m, r)| (m, r))
}

pub fn positional_strategy(arena: &Arena, g: &Graph, attr: &AttractorResult) -> Strategy {
    let moves = (0..g.len())
        .filter(|&q| g.owner[q] == Player::Charlie && attr.wins(q) && !g.finals[q])
        .filter_map(|q| best_edge(arena, g, attr, q).map(|(m, _)| (q, m)))
        .collect();
    Strategy { moves }
}

/// Violations of the attractor and strategy invariants, if any.
pub fn check_invariants(g: &Graph, attr: &AttractorResult, strategy: &Strategy) -> Vec<String> {
    let mut out = Vec::new();
    if attr.layers.windows(2).any(|w| w[0] > w[1]) {
        out.push("attractor chain is not monotone".into());
    }
    if attr.stationary_index() > g.len() {
        out.push(format!("stationary at {} > {} states", attr.stationary_index(), g.len()));
    }
    for q in 0..g.len() {
        let Some(l) = attr.level[q] else {
            if strategy.moves.contains_key(&q) {
                out.push(format!("strategy defined outside the winning region at {q}"));
            }
            continue;
        };
        if (l == 0) != g.finals[q] {
            out.push(format!("state {q}: level {l} but final = {}", g.finals[q]));
            continue;
        }
        if l == 0 {
            continue;
        }
        let levels: Vec<Option<u32>> = g.edges[q].iter().map(|&(_, r)| attr.level[r]).collect();
        match g.owner[q] {
            Player::Charlie => {
                if levels.iter().flatten().min() != Some(&(l - 1)) {
                    out.push(format!("Charlie state {q} at level {l} has no edge to level {}", l - 1));
                }
                match strategy.moves.get(&q).and_then(|&m| g.edges[q].iter().find(|e| e.0 == m)) {
                    Some(&(_, r)) if attr.level[r].is_some_and(|lr| lr < l) => {}
                    _ => out.push(format!("strategy at {q} does not decrease the level")),
                }
            }
            Player::Eve => {
                if levels.iter().any(|lr| lr.is_none_or(|lr| lr >= l)) {
                    out.push(format!("Eve state {q} at level {l} can avoid decreasing"));
                }
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// A solved game: the explored arena, its attractor and, when Charlie
/// wins, the strategy.
pub struct Solution {
    pub arena: Arena,
    pub graph: Graph,
    pub attractor: AttractorResult,
    pub strategy: Strategy,
}

impl Solution {
    pub fn charlie_wins(&self) -> bool {
        self.attractor.wins(self.arena.initial())
    }

    pub fn initial_level(&self) -> Option<u32> {
        self.attractor.level[self.arena.initial()]
    }
}

/// Builds and explores the arena of `game` (at most `max_states` states)
/// and solves it.
pub fn synthesize(game: &Game, policy: Policy, max_states: usize) -> Result<Solution, SynthError> {
    let mut arena = Arena::new(game, policy)?;
    arena.explore(max_states)?;
    let graph = Graph::of(&mut arena);
    let attractor = attractor(&graph);
    let strategy = positional_strategy(&arena, &graph, &attractor);
    Ok(Solution { arena, graph, attractor, strategy })
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ControlError {
    #[error("round {round}: {reason}")]
    NotApplicable { round: usize, reason: String },
}

/// The strategy lifted to plays: follows the rounds played so far on the
/// arena and answers with the strategy's move at the current state.
pub struct Controller<'a> {
    solution: &'a Solution,
    cursor: usize,
    rounds: Vec<Round>,
    plan: EventSequence,
}

impl<'a> Controller<'a> {
    pub fn new(solution: &'a Solution) -> Self {
        Controller { solution, cursor: solution.arena.initial(), rounds: Vec::new(), plan: EventSequence::default() }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn plan(&self) -> &EventSequence {
        &self.plan
    }

    pub fn next_kind(&self) -> RoundKind {
        if open_for_all(&self.plan, self.solution.arena.game()) {
            RoundKind::Ending
        } else {
            RoundKind::Starting
        }
    }

    fn prev(&self) -> Option<RoundKind> {
        self.rounds.last().map(Round::kind)
    }

    fn walk(&self, from: usize, moves: &[ArenaMove]) -> Option<usize> {
        moves.iter().try_fold(from, |q, &m| self.solution.graph.step(q, m))
    }

    /// The Charlie state where the next round's decision is taken.
    fn decision_state(&self) -> Option<usize> {
        self.walk(self.cursor, &Arena::prefix_moves(self.prev(), self.next_kind()))
    }

    /// Charlie's next move; `None` when he has none.
    pub fn charlie_move(&self) -> Option<CharlieMove> {
        let s = self.solution;
        let q = self.decision_state()?;
        let mv = match s.strategy.moves.get(&q) {
            Some(&m) => m,
            None => best_edge(&s.arena, &s.graph, &s.attractor, q)
                .map(|(m, _)| m)
                .or_else(|| s.graph.edges[q].iter().map(|&(m, _)| m).min_by_key(|m| s.arena.label(m)))?,
        };
        Some(s.arena.charlie_move_of(self.next_kind(), &mv))
    }

    /// Eve's possible answers to `charlie` in the next round.
    pub fn eve_options(&self, charlie: &CharlieMove) -> Vec<EveMove> {
        let s = self.solution;
        let Some(q) = self.decision_state() else { return vec![] };
        let Ok(mv) = s.arena.charlie_arena_move(charlie) else { return vec![] };
        let Some(r) = s.graph.step(q, mv) else { return vec![] };
        s.graph.edges[r].iter().map(|(m, _)| s.arena.eve_move_of(charlie, m)).collect()
    }

    /// Plays a round, checking it against the game rules and the arena.
    pub fn apply(&mut self, round: Round) -> Result<(), ControlError> {
        let fail = |reason: String| ControlError::NotApplicable { round: self.rounds.len(), reason };
        let plan = apply_round(&self.plan, &round, self.solution.arena.game()).map_err(|e| fail(e.to_string()))?;
        let moves = self.solution.arena.round_moves(self.prev(), &round).map_err(|e| fail(e.to_string()))?;
        let cursor = self
            .walk(self.cursor, &moves)
            .ok_or_else(|| fail(format!("{round} breaks the variables' durations or transitions")))?;
        self.plan = plan;
        self.cursor = cursor;
        self.rounds.push(round);
        Ok(())
    }

    pub fn is_successful(&self) -> bool {
        self.solution.graph.finals[self.cursor]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Success,
    AdmissibleButUnfinished,
    EveInadmissible { rule: String },
    CharlieStuck,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<Round>,
    pub plan: EventSequence,
    pub verdict: Verdict,
}

/// How Eve picks her move in a simulation.
pub trait EvePolicy {
    /// Eve's move in round `round`, answering `charlie`; `options` are the
    /// moves the arena allows, in canonical order.
    fn choose(&mut self, round: usize, charlie: &CharlieMove, options: &[EveMove]) -> Result<EveMove, String>;

    /// Called with the partial plan before every round.
    fn observe(&mut self, _plan: &EventSequence) {}
}

/// Replays a fixed list of moves; runs out with an error.
pub struct Scripted(pub VecDeque<EveMove>);

impl EvePolicy for Scripted {
    fn choose(&mut self, round: usize, _: &CharlieMove, _: &[EveMove]) -> Result<EveMove, String> {
        self.0.pop_front().ok_or_else(|| format!("script exhausted at round {round}"))
    }
}

pub struct Seeded(pub ChaCha8Rng);

impl Seeded {
    pub fn new(seed: u64) -> Self {
        Seeded(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl EvePolicy for Seeded {
    fn choose(&mut self, round: usize, _: &CharlieMove, options: &[EveMove]) -> Result<EveMove, String> {
        if options.is_empty() {
            return Err(format!("Eve has no move at round {round}"));
        }
        Ok(options[self.0.gen_range(0..options.len())].clone())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimulateError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("round {round}: {reason}")]
    Eve { round: usize, reason: String },
}

/// Name of a domain rule that the plan definitely violates, if any.
fn violated_domain_rule(arena: &Arena, plan: &EventSequence) -> Option<String> {
    let universe: &Universe = arena.universe();
    let word = universe.encode(plan, arena.d()).ok()?;
    let domain = arena.automaton().right().right().inner();
    if domain.run(&word) != RuleState::Sink {
        return None;
    }
    let problem = arena.game().domain_problem();
    for rule in &problem.rules {
        let single = crate::model::PlanningProblem { variables: problem.variables.clone(), rules: vec![rule.clone()] };
        let a = RuleAutomaton::new(&single, universe, arena.d(), Policy::PerTrigger).ok()?;
        if a.run(&word) == RuleState::Sink {
            return Some(rule.name.clone());
        }
    }
    Some("?".into())
}

/// Plays Charlie's strategy against `eve` for at most `horizon` rounds.
pub fn simulate(solution: &Solution, eve: &mut dyn EvePolicy, horizon: usize) -> Result<Transcript, SimulateError> {
    let mut c = Controller::new(solution);
    let verdict = loop {
        if c.is_successful() {
            break Verdict::Success;
        }
        if let Some(rule) = violated_domain_rule(&solution.arena, c.plan()) {
            break Verdict::EveInadmissible { rule };
        }
        if c.rounds().len() >= horizon {
            break Verdict::AdmissibleButUnfinished;
        }
        let Some(charlie) = c.charlie_move() else { break Verdict::CharlieStuck };
        eve.observe(c.plan());
        let round = c.rounds().len();
        let options = c.eve_options(&charlie);
        let eve = eve.choose(round, &charlie, &options).map_err(|reason| SimulateError::Eve { round, reason })?;
        let r = Round::new(charlie, eve).map_err(|e| SimulateError::Eve { round, reason: e.to_string() })?;
        c.apply(r)?;
    };
    Ok(Transcript { rounds: c.rounds, plan: c.plan, verdict })
}

/// Top-down AND-OR search with a depth bound, memoized on the monotone
/// answer: a win within `k` moves is a win within any `k' ≥ k`.
pub struct Minimax<'g> {
    graph: &'g Graph,
    win_from: Vec<u32>,
    lose_upto: Vec<Option<u32>>,
}

impl<'g> Minimax<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Minimax { graph, win_from: vec![u32::MAX; graph.len()], lose_upto: vec![None; graph.len()] }
    }

    pub fn wins(&mut self, q: usize, depth: u32) -> bool {
        if self.graph.finals[q] {
            return true;
        }
        if depth == 0 {
            return false;
        }
        if depth >= self.win_from[q] {
            return true;
        }
        if self.lose_upto[q].is_some_and(|l| depth <= l) {
            return false;
        }
        let g = self.graph;
        let result = match g.owner[q] {
            Player::Charlie => g.edges[q].iter().any(|&(_, r)| self.wins(r, depth - 1)),
            Player::Eve => g.edges[q].iter().all(|&(_, r)| self.wins(r, depth - 1)),
        };
        if result {
            self.win_from[q] = self.win_from[q].min(depth);
        } else {
            self.lose_upto[q] = Some(self.lose_upto[q].map_or(depth, |l| l.max(depth)));
        }
        result
    }

    /// An Eve choice at every losing Eve state reachable from `root`, such
    /// that no Charlie choice reaches a final state; `None` when Charlie
    /// wins from `root`.
    pub fn spoiler(&mut self, root: usize) -> Option<BTreeMap<usize, usize>> {
        let n = self.graph.len() as u32;
        if self.wins(root, n) {
            return None;
        }
        let mut policy = BTreeMap::new();
        let mut seen = BTreeSet::from([root]);
        let mut stack = vec![root];
        while let Some(q) = stack.pop() {
            let next: Vec<usize> = match self.graph.owner[q] {
                Player::Charlie => self.graph.edges[q].iter().map(|&(_, r)| r).collect(),
                Player::Eve => {
                    let r = self.graph.edges[q].iter().map(|&(_, r)| r).find(|&r| !self.wins(r, n))?;
                    policy.insert(q, r);
                    vec![r]
                }
            };
            for r in next {
                if seen.insert(r) {
                    stack.push(r);
                }
            }
        }
        Some(policy)
    }
}

/// Every state reachable from `root` when Eve follows `policy` and Charlie
/// moves freely.
pub fn reachable_under(g: &Graph, root: usize, policy: &BTreeMap<usize, usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([root]);
    let mut stack = vec![root];
    while let Some(q) = stack.pop() {
        let next: Vec<usize> = match g.owner[q] {
            Player::Charlie => g.edges[q].iter().map(|&(_, r)| r).collect(),
            Player::Eve => policy.get(&q).copied().into_iter().collect(),
        };
        for r in next {
            if seen.insert(r) {
                stack.push(r);
            }
        }
    }
    seen
}

/// Looks for a way for Eve, choosing freely at every visit, to keep the
/// strategy away from the final states forever: a reachable non-final
/// cycle, or a non-final Charlie state without a strategy move. Returns
/// the offending path.
pub fn defeat(g: &Graph, strategy: &Strategy, root: usize) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; g.len()];
    let mut path = vec![root];
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    mark[root] = Mark::Open;
    while let Some(&mut (q, ref mut i)) = stack.last_mut() {
        let succ: Vec<usize> = if g.finals[q] {
            vec![]
        } else {
            match g.owner[q] {
                Player::Charlie => match strategy.moves.get(&q) {
                    Some(&m) => g.edges[q].iter().filter(|e| e.0 == m).map(|e| e.1).collect(),
                    None => return Some(path),
                },
                Player::Eve => g.edges[q].iter().map(|e| e.1).collect(),
            }
        };
        if let Some(&r) = succ.get(*i) {
            *i += 1;
            match mark[r] {
                Mark::Open => {
                    path.push(r);
                    return Some(path);
                }
                Mark::Done => {}
                Mark::New => {
                    mark[r] = Mark::Open;
                    stack.push((r, 0));
                    path.push(r);
                }
            }
        } else {
            mark[q] = Mark::Done;
            stack.pop();
            path.pop();
        }
    }
    None
}

/// Runs `f` on a thread with a large stack, for deep recursions.
pub fn with_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(1 << 30)
        .spawn(f)
        .expect("spawn solver thread")
        .join()
        .expect("solver thread panicked")
}

#[cfg(test)]
mod tests;
