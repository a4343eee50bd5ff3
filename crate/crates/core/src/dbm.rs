//! Difference bound matrices and matching structures.
//!
//! Terms of a statement are indexed as `2k` for `start(a_k)` and `2k + 1`
//! for `end(a_k)`, where `a_0` is the trigger and `a_1..a_m` the
//! quantified tokens. `entry(T, T')` is an upper bound on `T - T'`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Endpoint, PlanningProblem, Rule, Statement, Term, Upper};

pub type Bound = i64;
pub const INF: Bound = Bound::MAX;

fn add(b: Bound, delta: u64) -> Bound {
    if b == INF {
        INF
    } else {
        b.saturating_add(delta as i64)
    }
}

fn sub(b: Bound, delta: u64) -> Bound {
    if b == INF {
        INF
    } else {
        b.saturating_sub(delta as i64)
    }
}

fn show(b: Bound) -> String {
    if b == INF {
        "inf".into()
    } else {
        b.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dbm {
    size: usize,
    entries: Vec<Bound>,
}

impl Dbm {
    /// All entries `+inf` except the zero diagonal.
    pub fn new(size: usize) -> Dbm {
        let mut entries = vec![INF; size * size];
        for i in 0..size {
            entries[i * size + i] = 0;
        }
        Dbm { size, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> Bound {
        self.entries[i * self.size + j]
    }

    fn set(&mut self, i: usize, j: usize, b: Bound) {
        self.entries[i * self.size + j] = b;
    }

    /// Records `T_i - T_j <= b`, keeping the tighter of two bounds.
    pub fn tighten(&mut self, i: usize, j: usize, b: Bound) {
        if b < self.get(i, j) {
            self.set(i, j, b);
        }
    }
}

pub fn term_index(endpoint: Endpoint, token: usize) -> usize {
    2 * token + usize::from(endpoint == Endpoint::End)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("rule `{0}` has no trigger")]
    Triggerless(String),
    #[error("rule `{rule}`: token `{token}` is not quantified")]
    UnboundToken { rule: String, token: String },
    #[error("no duration known for {var}={value}")]
    UnknownDuration { var: String, value: String },
}

/// Token names of a statement in term order: trigger first, then the
/// quantifiers.
pub fn token_names<'a>(rule: &'a Rule, stmt: &'a Statement) -> Result<Vec<&'a str>, CompileError> {
    let trigger = rule.trigger.as_ref().ok_or_else(|| CompileError::Triggerless(rule.name.clone()))?;
    Ok(std::iter::once(trigger.token.as_str()).chain(stmt.quantifiers.iter().map(|q| q.token.as_str())).collect())
}

/// Term labels in index order.
pub fn term_labels(rule: &Rule, stmt: &Statement) -> Result<Vec<Term>, CompileError> {
    Ok(token_names(rule, stmt)?
        .into_iter()
        .flat_map(|t| [Term::start(t), Term::end(t)])
        .collect())
}

/// The DBM of the statement's clause alone.
pub fn compile_clause(rule: &Rule, stmt: &Statement) -> Result<Dbm, CompileError> {
    let names = token_names(rule, stmt)?;
    let index = |term: &Term| {
        names
            .iter()
            .position(|n| *n == term.token)
            .map(|k| term_index(term.endpoint, k))
            .ok_or_else(|| CompileError::UnboundToken { rule: rule.name.clone(), token: term.token.clone() })
    };
    let mut dbm = Dbm::new(2 * names.len());
    for atom in &stmt.atoms {
        let (t, t2) = (index(&atom.lhs)?, index(&atom.rhs)?);
        // A term against itself is either trivially true or, with a
        // positive lower bound, never; see `is_contradictory`.
        if t == t2 {
            continue;
        }
        if let Upper::Finite(u) = atom.upper {
            dbm.tighten(t2, t, u as Bound);
        }
        dbm.tighten(t, t2, -(atom.lower as Bound));
    }
    Ok(dbm)
}

/// True when the clause relates a term to itself with a positive lower
/// bound, so no assignment can satisfy it.
pub fn is_contradictory(stmt: &Statement) -> bool {
    stmt.atoms.iter().any(|a| a.lhs == a.rhs && a.lower > 0)
}

/// The clause DBM augmented with the duration bounds of every quantified
/// token (not the trigger). `durations` maps `(var, value)` to
/// `(min, max)`.
pub fn compile_statement(
    rule: &Rule,
    stmt: &Statement,
    durations: impl Fn(&str, &str) -> Option<(u64, Upper)>,
) -> Result<Dbm, CompileError> {
    let mut dbm = compile_clause(rule, stmt)?;
    for (k, q) in stmt.quantifiers.iter().enumerate() {
        let (min, max) = durations(&q.var, &q.value)
            .ok_or_else(|| CompileError::UnknownDuration { var: q.var.clone(), value: q.value.clone() })?;
        let (s, e) = (term_index(Endpoint::Start, k + 1), term_index(Endpoint::End, k + 1));
        dbm.tighten(s, e, -(min as Bound));
        if let Upper::Finite(max) = max {
            dbm.tighten(e, s, max as Bound);
        }
    }
    Ok(dbm)
}

pub fn problem_durations(problem: &PlanningProblem) -> impl Fn(&str, &str) -> Option<(u64, Upper)> + '_ {
    move |var, value| {
        let v = problem.variable(var)?.value(value)?;
        Some((v.min_duration, v.max_duration))
    }
}

fn finite_uppers(problem: &PlanningProblem) -> impl Iterator<Item = u64> + '_ {
    problem
        .rules
        .iter()
        .flat_map(|r| r.statements.iter())
        .flat_map(|s| s.atoms.iter())
        .filter_map(|a| a.upper.finite())
}

/// Product of the finite non-zero upper bounds of all atoms.
pub fn window(problem: &PlanningProblem) -> u64 {
    finite_uppers(problem).filter(|&u| u > 0).fold(1u64, |acc, u| acc.saturating_mul(u))
}

/// Largest delay of the alphabet: one more than the largest lower or
/// finite upper bound of any atom.
pub fn gap_bound(problem: &PlanningProblem) -> u64 {
    let lower = problem
        .rules
        .iter()
        .flat_map(|r| r.statements.iter())
        .flat_map(|s| s.atoms.iter())
        .map(|a| a.lower)
        .max()
        .unwrap_or(0);
    let upper = finite_uppers(problem).max().unwrap_or(0);
    lower.max(upper) + 1
}

/// Which actions a statement's tokens are matched against: for token `k`,
/// the bit indices of `start(x_k, v_k)` and `end(x_k, v_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatementShape {
    pub tokens: Vec<(u8, u8)>,
}

impl StatementShape {
    fn action_bit(&self, term: usize) -> u8 {
        let (s, e) = self.tokens[term / 2];
        if term.is_multiple_of(2) {
            s
        } else {
            e
        }
    }

    pub fn term_count(&self) -> usize {
        2 * self.tokens.len()
    }
}

/// `(V, D, M, t)` for one statement; `V` and the action bindings live in
/// the statement's [`StatementShape`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchingStructure {
    pub statement: u16,
    pub dbm: Dbm,
    pub matched: u32,
    pub age: u64,
}

fn bit(i: usize) -> u32 {
    1 << i
}

impl MatchingStructure {
    pub fn initial(statement: u16, dbm: Dbm) -> Self {
        assert!(dbm.size() <= 32, "at most 15 quantifiers per statement");
        MatchingStructure { statement, dbm, matched: 0, age: 0 }
    }

    fn all(&self) -> u32 {
        if self.dbm.size() == 32 {
            u32::MAX
        } else {
            bit(self.dbm.size()) - 1
        }
    }

    pub fn is_matched(&self, term: usize) -> bool {
        self.matched & bit(term) != 0
    }

    pub fn is_closed(&self) -> bool {
        self.matched == self.all()
    }

    pub fn is_initial(&self) -> bool {
        self.matched == 0
    }

    /// Active: the trigger start is matched and the structure is not closed.
    pub fn is_active(&self) -> bool {
        !self.is_closed() && self.is_matched(0)
    }

    fn split(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.dbm.size()).partition(|&t| self.is_matched(t))
    }

    /// Time shifting by `delta`.
    ///
    /// Entries from a matched to an unmatched term are lower bounds that
    /// loosen as time passes; once such an entry is non-negative it can no
    /// longer constrain anything (the unmatched term will be matched at a
    /// strictly later time), so it stops growing at zero. This keeps the
    /// set of reachable structures finite without changing any test below.
    /// The age grows only while the structure is active, up to `cap`.
    pub fn shift(&self, delta: u64, cap: u64) -> Self {
        let mut out = self.clone();
        let (inside, outside) = self.split();
        for &t in &inside {
            for &u in &outside {
                let lower = self.dbm.get(t, u);
                out.dbm.set(t, u, add(lower, delta).min(lower.max(0)));
                out.dbm.set(u, t, sub(self.dbm.get(u, t), delta));
            }
        }
        if self.is_active() {
            out.age = (self.age + delta).min(cap);
        }
        out
    }

    /// The literal shift: no clamping of lower bounds, no age cap.
    pub fn shift_exact(&self, delta: u64) -> Self {
        let mut out = self.clone();
        let (inside, outside) = self.split();
        for &t in &inside {
            for &u in &outside {
                out.dbm.set(t, u, add(self.dbm.get(t, u), delta));
                out.dbm.set(u, t, sub(self.dbm.get(u, t), delta));
            }
        }
        if self.is_active() {
            out.age += delta;
        }
        out
    }

    /// Adds `terms` (a bit set) to the matched set.
    pub fn with_matched(&self, terms: u32) -> Self {
        MatchingStructure { matched: self.matched | terms, ..self.clone() }
    }

    pub fn admissible(&self, delta: u64) -> bool {
        let (inside, outside) = self.split();
        inside.iter().all(|&t| outside.iter().all(|&u| {
            let b = self.dbm.get(u, t);
            b == INF || delta as i128 <= b as i128
        }))
    }

    /// Whether `(actions, delta)` is an `I`-match event for the set `i`.
    ///
    /// Two distinct terms matched by the same event get the same time, so
    /// both entries between them must admit a zero difference.
    pub fn is_match(&self, shape: &StatementShape, actions: u128, delta: u64, i: u32) -> bool {
        self.is_match_with(shape, actions, delta, i, false)
    }

    /// Same as [`is_match`](Self::is_match) with the simultaneity test
    /// read verbatim: one of the two entries is zero, or both are infinite.
    /// This admits contradictory pairs such as `(0, -1)`.
    pub fn is_match_verbatim(&self, shape: &StatementShape, actions: u128, delta: u64, i: u32) -> bool {
        self.is_match_with(shape, actions, delta, i, true)
    }

    fn is_match_with(&self, shape: &StatementShape, actions: u128, delta: u64, i: u32, verbatim: bool) -> bool {
        if i & self.matched != 0 || !self.admissible(delta) {
            return false;
        }
        let n = self.dbm.size();
        let has = |term: usize| actions >> shape.action_bit(term) & 1 == 1;
        for k in 0..n / 2 {
            let (s, e) = (2 * k, 2 * k + 1);
            if i & bit(s) != 0 && !has(s) {
                return false;
            }
            let forced = self.is_matched(s) && !self.is_matched(e) && has(e);
            if (i & bit(e) != 0) != forced {
                return false;
            }
        }
        let in_i = |t: usize| i & bit(t) != 0;
        for t in (0..n).filter(|&t| in_i(t)) {
            for u in (0..n).filter(|&u| u != t) {
                let before = self.dbm.get(u, t);
                if before != INF && before <= 0 && !self.is_matched(u) && !in_i(u) {
                    return false;
                }
                if self.is_matched(u) && before != INF && (delta as i128) < -(before as i128) {
                    return false;
                }
                if in_i(u) {
                    let after = self.dbm.get(t, u);
                    let ok = if verbatim {
                        before == 0 || after == 0 || (before == INF && after == INF)
                    } else {
                        before >= 0 && after >= 0
                    };
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Candidate sets `I`: the forced ends plus any subset of the starts
    /// whose action occurs in the event.
    fn candidates(&self, shape: &StatementShape, actions: u128) -> (u32, Vec<usize>) {
        let has = |term: usize| actions >> shape.action_bit(term) & 1 == 1;
        let mut forced = 0;
        let mut optional = Vec::new();
        for k in 0..self.dbm.size() / 2 {
            let (s, e) = (2 * k, 2 * k + 1);
            if self.is_matched(s) && !self.is_matched(e) && has(e) {
                forced |= bit(e);
            }
            if !self.is_matched(s) && has(s) {
                optional.push(s);
            }
        }
        (forced, optional)
    }

    fn matches_with(
        &self,
        shape: &StatementShape,
        actions: u128,
        delta: u64,
        test: impl Fn(&Self, u32) -> bool,
    ) -> Vec<u32> {
        if !self.admissible(delta) {
            return Vec::new();
        }
        let (forced, optional) = self.candidates(shape, actions);
        let mut out = Vec::new();
        for mask in 0..1u32 << optional.len() {
            let mut i = forced;
            for (j, &t) in optional.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    i |= bit(t);
                }
            }
            if test(self, i) {
                out.push(i);
            }
        }
        out
    }

    /// Every `I` for which the event is an `I`-match.
    pub fn match_sets(&self, shape: &StatementShape, actions: u128, delta: u64) -> Vec<u32> {
        self.matches_with(shape, actions, delta, |m, i| m.is_match(shape, actions, delta, i))
    }

    /// Successors `(M + delta) ∪ I`.
    pub fn step(&self, shape: &StatementShape, actions: u128, delta: u64, cap: u64) -> Vec<MatchingStructure> {
        let shifted = self.shift(delta, cap);
        self.match_sets(shape, actions, delta).into_iter().map(|i| shifted.with_matched(i)).collect()
    }

    pub fn step_verbatim(&self, shape: &StatementShape, actions: u128, delta: u64) -> Vec<MatchingStructure> {
        let shifted = self.shift_exact(delta);
        self.matches_with(shape, actions, delta, |m, i| m.is_match_verbatim(shape, actions, delta, i))
            .into_iter()
            .map(|i| shifted.with_matched(i))
            .collect()
    }

    /// Matrix dump with row and column labels, `.` for `+inf`.
    pub fn table(&self, labels: &[Term]) -> String {
        let names: Vec<String> = labels.iter().map(|t| t.to_string()).collect();
        let width = names.iter().map(|s| s.len()).max().unwrap_or(1).max(4);
        let mut out = format!("{:width$}", "");
        for n in &names {
            out += &format!(" {n:>width$}");
        }
        out.push('\n');
        for (i, n) in names.iter().enumerate() {
            let mark = if self.is_matched(i) { '*' } else { ' ' };
            out += &format!("{:width$}", format!("{n}{mark}"));
            for j in 0..names.len() {
                let b = self.dbm.get(i, j);
                let cell = if b == INF { ".".to_string() } else { show(b) };
                out += &format!(" {cell:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for MatchingStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}[M={:#b}, t={}]", self.statement, self.matched, self.age)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, Quantifier};
    use proptest::prelude::*;

    fn atom(lhs: Term, rhs: Term, lower: u64, upper: Upper) -> Atom {
        Atom { lhs, rhs, lower, upper }
    }

    fn example_rule() -> Rule {
        Rule {
            name: "example".into(),
            trigger: Some(Quantifier::new("a0", "x0", "v0")),
            statements: vec![Statement {
                quantifiers: vec![
                    Quantifier::new("a1", "x1", "v1"),
                    Quantifier::new("a2", "x2", "v2"),
                    Quantifier::new("a3", "x3", "v3"),
                ],
                atoms: vec![
                    atom(Term::start("a1"), Term::end("a0"), 4, Upper::Finite(14)),
                    atom(Term::end("a0"), Term::end("a2"), 0, Upper::Infinite),
                    atom(Term::start("a2"), Term::end("a3"), 0, Upper::Finite(3)),
                ],
            }],
        }
    }

    const S: Endpoint = Endpoint::Start;
    const E: Endpoint = Endpoint::End;

    #[test]
    fn example_clause_dbm() {
        let rule = example_rule();
        let dbm = compile_clause(&rule, &rule.statements[0]).unwrap();
        let t = term_index;
        let mut expected = Dbm::new(8);
        expected.tighten(t(S, 1), t(E, 0), -4);
        expected.tighten(t(E, 0), t(S, 1), 14);
        expected.tighten(t(E, 3), t(S, 2), 3);
        expected.tighten(t(S, 2), t(E, 3), 0);
        expected.tighten(t(E, 0), t(E, 2), 0);
        assert_eq!(dbm, expected);
        let finite = (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).filter(|&(i, j)| i != j && dbm.get(i, j) != INF);
        assert_eq!(finite.count(), 5);
    }

    #[test]
    fn example_window_and_gap_bound() {
        let problem = PlanningProblem { variables: vec![], rules: vec![example_rule()] };
        assert_eq!(window(&problem), 42);
        assert_eq!(gap_bound(&problem), 15);
        let qualitative = PlanningProblem {
            variables: vec![],
            rules: vec![Rule {
                name: "r".into(),
                trigger: Some(Quantifier::new("a", "x", "p")),
                statements: vec![Statement {
                    quantifiers: vec![],
                    atoms: vec![
                        atom(Term::start("a"), Term::end("a"), 0, Upper::Finite(0)),
                        atom(Term::start("a"), Term::end("a"), 0, Upper::Infinite),
                    ],
                }],
            }],
        };
        assert_eq!(window(&qualitative), 1);
        assert_eq!(gap_bound(&qualitative), 1);
    }

    #[test]
    fn window_of_two_rules() {
        let mk = |uppers: &[u64]| Rule {
            name: "r".into(),
            trigger: Some(Quantifier::new("a", "x", "p")),
            statements: vec![Statement {
                quantifiers: vec![],
                atoms: uppers.iter().map(|&u| atom(Term::start("a"), Term::end("a"), 0, Upper::Finite(u))).collect(),
            }],
        };
        let problem = PlanningProblem { variables: vec![], rules: vec![mk(&[2]), mk(&[5, 3])] };
        assert_eq!(window(&problem), 30);
    }

    #[test]
    fn duration_augmentation() {
        let rule = Rule {
            name: "r".into(),
            trigger: Some(Quantifier::new("a0", "x", "p")),
            statements: vec![Statement { quantifiers: vec![Quantifier::new("a1", "x", "q")], atoms: vec![] }],
        };
        let dbm = compile_statement(&rule, &rule.statements[0], |_, _| Some((1, Upper::Infinite))).unwrap();
        let mut expected = Dbm::new(4);
        expected.tighten(term_index(S, 1), term_index(E, 1), -1);
        assert_eq!(dbm, expected);
        assert!(compile_statement(&rule, &rule.statements[0], |_, _| None).is_err());
    }

    #[test]
    fn tighter_bound_wins() {
        let rule = Rule {
            name: "r".into(),
            trigger: Some(Quantifier::new("a", "x", "p")),
            statements: vec![Statement {
                quantifiers: vec![Quantifier::new("b", "x", "q")],
                atoms: vec![
                    atom(Term::end("a"), Term::start("b"), 0, Upper::Finite(5)),
                    atom(Term::end("a"), Term::start("b"), 0, Upper::Finite(3)),
                ],
            }],
        };
        let dbm = compile_clause(&rule, &rule.statements[0]).unwrap();
        assert_eq!(dbm.get(term_index(S, 1), term_index(E, 0)), 3);
    }

    #[test]
    fn shift_example() {
        let rule = example_rule();
        let dbm = compile_clause(&rule, &rule.statements[0]).unwrap();
        let m = MatchingStructure { statement: 0, dbm, matched: bit(term_index(S, 1)), age: 0 };
        let shifted = m.shift(1, 42);
        assert_eq!(shifted.dbm.get(term_index(S, 1), term_index(E, 0)), -3);
        assert_eq!(m.shift_exact(1).dbm.get(term_index(S, 1), term_index(E, 0)), -3);
        assert!(m.admissible(14));
        assert!(!m.admissible(15));
    }

    #[test]
    fn initial_structure_is_unchanged_by_shift() {
        let rule = example_rule();
        let m = MatchingStructure::initial(0, compile_clause(&rule, &rule.statements[0]).unwrap());
        assert_eq!(m.shift(7, 42), m);
        assert!((1..50).all(|d| m.admissible(d)));
    }

    fn meets() -> (Rule, StatementShape, Dbm) {
        let rule = Rule {
            name: "r".into(),
            trigger: Some(Quantifier::new("a0", "x", "p")),
            statements: vec![Statement {
                quantifiers: vec![Quantifier::new("a1", "x", "q")],
                atoms: vec![atom(Term::end("a0"), Term::start("a1"), 0, Upper::Finite(2))],
            }],
        };
        // Bits: start(x,p)=0, end(x,p)=1, start(x,q)=2, end(x,q)=3.
        let shape = StatementShape { tokens: vec![(0, 1), (2, 3)] };
        let dbm = compile_statement(&rule, &rule.statements[0], |_, _| Some((1, Upper::Infinite))).unwrap();
        (rule, shape, dbm)
    }

    #[test]
    fn trigger_start_match() {
        let (_, shape, dbm) = meets();
        let m = MatchingStructure::initial(0, dbm);
        let succ = m.step(&shape, 0b0001, 1, 2);
        assert_eq!(succ.len(), 2);
        assert!(succ.contains(&m));
        let captured = succ.iter().find(|s| s.matched == 1).unwrap();
        assert_eq!(captured.age, 0);
        assert!(captured.is_active());
        assert_eq!(captured.shift(1, 2).age, 1);
    }

    #[test]
    fn end_cannot_match_with_its_start() {
        let (_, shape, dbm) = meets();
        let m = MatchingStructure::initial(0, dbm);
        // start(x,p) and end(x,p) together: only start(a0) can be matched.
        for s in m.step(&shape, 0b0011, 1, 2) {
            assert!(!s.is_matched(1));
        }
    }

    #[test]
    fn forced_end_and_inadmissible_events() {
        let (_, shape, dbm) = meets();
        let m = MatchingStructure::initial(0, dbm).with_matched(1);
        // end(x,p) forces end(a0) into I; start(a1) optional.
        let succ = m.step(&shape, 0b0110, 1, 2);
        assert!(succ.iter().all(|s| s.is_matched(1)));
        assert_eq!(succ.len(), 2);
        let ended = m.with_matched(2);
        // start(a1) must follow end(a0) within 2.
        assert!(ended.admissible(2));
        assert!(ended.step(&shape, 0, 3, 10).is_empty());
    }

    #[test]
    fn verbatim_simultaneity_accepts_contradictory_pairs() {
        // end(a0) <=[0,0] start(a1) and end(a0) <=[1,inf] start(a1):
        // entries (0, -1) satisfy the verbatim test but not the corrected one.
        let rule = Rule {
            name: "r".into(),
            trigger: Some(Quantifier::new("a0", "x", "p")),
            statements: vec![Statement {
                quantifiers: vec![Quantifier::new("a1", "y", "q")],
                atoms: vec![
                    atom(Term::end("a0"), Term::start("a1"), 0, Upper::Finite(0)),
                    atom(Term::end("a0"), Term::start("a1"), 1, Upper::Infinite),
                ],
            }],
        };
        let shape = StatementShape { tokens: vec![(0, 1), (2, 3)] };
        let dbm = compile_clause(&rule, &rule.statements[0]).unwrap();
        let m = MatchingStructure::initial(0, dbm).with_matched(1);
        let i = bit(1) | bit(2);
        assert!(m.is_match_verbatim(&shape, 0b0110, 1, i));
        assert!(!m.is_match(&shape, 0b0110, 1, i));
    }

    fn arb_structure() -> impl Strategy<Value = MatchingStructure> {
        (prop::collection::vec(prop::option::of(-4i64..6), 16), 0u32..16, 0u64..5).prop_map(|(cells, matched, age)| {
            let mut dbm = Dbm::new(4);
            for (k, c) in cells.into_iter().enumerate() {
                let (i, j) = (k / 4, k % 4);
                if i != j {
                    dbm.set(i, j, c.unwrap_or(INF));
                }
            }
            MatchingStructure { statement: 0, dbm, matched, age }
        })
    }

    proptest! {
        #[test]
        fn shifts_compose(m in arb_structure(), a in 1u64..5, b in 1u64..5) {
            prop_assert_eq!(m.shift(a, 1000).shift(b, 1000), m.shift(a + b, 1000));
            prop_assert_eq!(m.shift_exact(a).shift_exact(b), m.shift_exact(a + b));
        }

        #[test]
        fn admissibility_is_monotone(m in arb_structure()) {
            let mut prev = true;
            for d in 1..12 {
                let now = m.admissible(d);
                prop_assert!(prev || !now);
                prev = now;
            }
        }

        #[test]
        fn successors_differ_only_in_matched_terms(m in arb_structure(), actions in 0u128..16, d in 1u64..4) {
            let shape = StatementShape { tokens: vec![(0, 1), (2, 3)] };
            let unmatched = (0..4).filter(|&t| !m.is_matched(t)).count();
            let succ = m.step(&shape, actions, d, 1000);
            prop_assert!(succ.len() <= 1 << unmatched);
            let shifted = m.shift(d, 1000);
            for s in succ {
                prop_assert_eq!(&s.dbm, &shifted.dbm);
                prop_assert_eq!(s.age, shifted.age);
                prop_assert_eq!(s.matched & m.matched, m.matched);
            }
        }

        #[test]
        fn closed_stays_closed(mut m in arb_structure(), d in 1u64..4) {
            m.matched = 0b1111;
            let shape = StatementShape { tokens: vec![(0, 1), (2, 3)] };
            prop_assert_eq!(m.step(&shape, 0, d, 1000), vec![m.shift(d, 1000)]);
        }
    }

    #[test]
    fn table_dump_lists_every_term() {
        let rule = example_rule();
        let m = MatchingStructure::initial(0, compile_clause(&rule, &rule.statements[0]).unwrap());
        let table = m.table(&term_labels(&rule, &rule.statements[0]).unwrap());
        assert_eq!(table.lines().count(), 9);
        assert!(table.contains("start(a1)"));
        assert!(table.lines().nth(2).unwrap().split_whitespace().any(|c| c == "14"));
    }
}
