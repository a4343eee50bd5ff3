use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Which endpoint of a token an action or a term refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Start,
    End,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Start => f.write_str("start"),
            Endpoint::End => f.write_str("end"),
        }
    }
}

/// An upper bound that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Upper {
    Finite(u64),
    Infinite,
}

impl Upper {
    pub fn finite(self) -> Option<u64> {
        match self {
            Upper::Finite(u) => Some(u),
            Upper::Infinite => None,
        }
    }

    pub fn admits(self, value: u64) -> bool {
        match self {
            Upper::Finite(u) => value <= u,
            Upper::Infinite => true,
        }
    }
}

impl fmt::Display for Upper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Upper::Finite(u) => write!(f, "{u}"),
            Upper::Infinite => f.write_str("inf"),
        }
    }
}

/// Controllability tag of a value: decides who may end tokens holding it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Controllable,
    Uncontrollable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    Charlie,
    Eve,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Charlie => f.write_str("Charlie"),
            Player::Eve => f.write_str("Eve"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Value {
    pub name: String,
    pub successors: BTreeSet<String>,
    pub min_duration: u64,
    pub max_duration: Upper,
    pub tag: Tag,
}

impl Value {
    /// A value with the defaults of the input language: no successors,
    /// duration `[1, inf]`, controllable.
    pub fn new(name: impl Into<String>) -> Self {
        Value {
            name: name.into(),
            successors: BTreeSet::new(),
            min_duration: 1,
            max_duration: Upper::Infinite,
            tag: Tag::Controllable,
        }
    }

    pub fn admits_duration(&self, duration: u64) -> bool {
        self.min_duration <= duration && self.max_duration.admits(duration)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateVariable {
    pub name: String,
    pub values: Vec<Value>,
}

impl StateVariable {
    pub fn value(&self, name: &str) -> Option<&Value> {
        self.values.iter().find(|v| v.name == name)
    }

    pub fn value_index(&self, name: &str) -> Option<usize> {
        self.values.iter().position(|v| v.name == name)
    }
}

/// `start(x, v)` or `end(x, v)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub kind: Endpoint,
    pub var: String,
    pub value: String,
}

impl Action {
    pub fn start(var: impl Into<String>, value: impl Into<String>) -> Self {
        Action { kind: Endpoint::Start, var: var.into(), value: value.into() }
    }

    pub fn end(var: impl Into<String>, value: impl Into<String>) -> Self {
        Action { kind: Endpoint::End, var: var.into(), value: value.into() }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.kind, self.var, self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub endpoint: Endpoint,
    pub token: String,
}

impl Term {
    pub fn start(token: impl Into<String>) -> Self {
        Term { endpoint: Endpoint::Start, token: token.into() }
    }

    pub fn end(token: impl Into<String>) -> Self {
        Term { endpoint: Endpoint::End, token: token.into() }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.endpoint, self.token)
    }
}

/// `lhs <=[lower, upper] rhs`, i.e. `lower <= time(rhs) - time(lhs) <= upper`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub lhs: Term,
    pub rhs: Term,
    pub lower: u64,
    pub upper: Upper,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quantifier {
    pub token: String,
    pub var: String,
    pub value: String,
}

impl Quantifier {
    pub fn new(token: impl Into<String>, var: impl Into<String>, value: impl Into<String>) -> Self {
        Quantifier { token: token.into(), var: var.into(), value: value.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Statement {
    pub quantifiers: Vec<Quantifier>,
    pub atoms: Vec<Atom>,
}

/// `trigger => E1 | ... | Ek`; a rule without trigger is a goal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub trigger: Option<Quantifier>,
    pub statements: Vec<Statement>,
}

/// A set of variables and a set of rules over them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanningProblem {
    pub variables: Vec<StateVariable>,
    pub rules: Vec<Rule>,
}

impl PlanningProblem {
    pub fn variable(&self, name: &str) -> Option<&StateVariable> {
        self.variables.iter().find(|v| v.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Game {
    pub controlled: Vec<StateVariable>,
    pub external: Vec<StateVariable>,
    pub system_rules: Vec<Rule>,
    pub domain_rules: Vec<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate value `{value}` in variable `{var}`")]
    DuplicateValue { var: String, value: String },
    #[error("variable `{var}`: successor `{successor}` of `{value}` is not a value of the variable")]
    UnknownSuccessor { var: String, value: String, successor: String },
    #[error("variable `{var}`, value `{value}`: minimum duration must be at least 1")]
    ZeroMinDuration { var: String, value: String },
    #[error("variable `{var}`, value `{value}`: minimum duration {min} exceeds maximum {max}")]
    EmptyDuration { var: String, value: String, min: u64, max: u64 },
    #[error("rule `{rule}`: unknown variable `{var}`")]
    UnknownVariable { rule: String, var: String },
    #[error("rule `{rule}`: `{value}` is not a value of `{var}`")]
    UnknownValue { rule: String, var: String, value: String },
    #[error("rule `{rule}`: token `{token}` is quantified more than once")]
    DuplicateToken { rule: String, token: String },
    #[error("rule `{rule}`: token `{token}` is not quantified")]
    UnboundToken { rule: String, token: String },
    #[error("rule `{rule}`: atom lower bound {lower} exceeds upper bound {upper}")]
    EmptyAtom { rule: String, lower: u64, upper: u64 },
    #[error("rule `{rule}` has no existential statement")]
    NoStatements { rule: String },
}

/// Checks the variable-level invariants shared by games and problems.
pub fn validate_variables<'a>(
    vars: impl IntoIterator<Item = &'a StateVariable>,
) -> Vec<ModelError> {
    let mut errors = Vec::new();
    let mut names = HashSet::new();
    for var in vars {
        if !names.insert(var.name.as_str()) {
            errors.push(ModelError::DuplicateVariable(var.name.clone()));
        }
        let mut values = HashSet::new();
        for value in &var.values {
            if !values.insert(value.name.as_str()) {
                errors.push(ModelError::DuplicateValue {
                    var: var.name.clone(),
                    value: value.name.clone(),
                });
            }
            for succ in &value.successors {
                if var.value(succ).is_none() {
                    errors.push(ModelError::UnknownSuccessor {
                        var: var.name.clone(),
                        value: value.name.clone(),
                        successor: succ.clone(),
                    });
                }
            }
            if value.min_duration == 0 {
                errors.push(ModelError::ZeroMinDuration {
                    var: var.name.clone(),
                    value: value.name.clone(),
                });
            }
            if let Upper::Finite(max) = value.max_duration {
                if value.min_duration > max {
                    errors.push(ModelError::EmptyDuration {
                        var: var.name.clone(),
                        value: value.name.clone(),
                        min: value.min_duration,
                        max,
                    });
                }
            }
        }
    }
    errors
}

/// Checks that a rule only mentions declared variables, values and tokens.
pub fn validate_rule<'v>(rule: &Rule, lookup: impl Fn(&str) -> Option<&'v StateVariable>) -> Vec<ModelError> {
    let mut errors = Vec::new();
    let check_quantifier = |q: &Quantifier, errors: &mut Vec<ModelError>| match lookup(&q.var) {
        None => errors.push(ModelError::UnknownVariable { rule: rule.name.clone(), var: q.var.clone() }),
        Some(var) if var.value(&q.value).is_none() => errors.push(ModelError::UnknownValue {
            rule: rule.name.clone(),
            var: q.var.clone(),
            value: q.value.clone(),
        }),
        Some(_) => {}
    };
    if rule.statements.is_empty() {
        errors.push(ModelError::NoStatements { rule: rule.name.clone() });
    }
    if let Some(trigger) = &rule.trigger {
        check_quantifier(trigger, &mut errors);
    }
    for stmt in &rule.statements {
        let mut bound: HashSet<&str> = HashSet::new();
        if let Some(trigger) = &rule.trigger {
            bound.insert(&trigger.token);
        }
        for q in &stmt.quantifiers {
            check_quantifier(q, &mut errors);
            if !bound.insert(&q.token) {
                errors.push(ModelError::DuplicateToken { rule: rule.name.clone(), token: q.token.clone() });
            }
        }
        for atom in &stmt.atoms {
            for term in [&atom.lhs, &atom.rhs] {
                if !bound.contains(term.token.as_str()) {
                    errors.push(ModelError::UnboundToken {
                        rule: rule.name.clone(),
                        token: term.token.clone(),
                    });
                }
            }
            if let Upper::Finite(u) = atom.upper {
                if atom.lower > u {
                    errors.push(ModelError::EmptyAtom { rule: rule.name.clone(), lower: atom.lower, upper: u });
                }
            }
        }
    }
    errors
}

impl PlanningProblem {
    pub fn validate(&self) -> Vec<ModelError> {
        let mut errors = validate_variables(&self.variables);
        for rule in &self.rules {
            errors.extend(validate_rule(rule, |name| self.variable(name)));
        }
        errors
    }
}

impl Game {
    pub fn variables(&self) -> impl Iterator<Item = &StateVariable> {
        self.controlled.iter().chain(self.external.iter())
    }

    pub fn variable(&self, name: &str) -> Option<&StateVariable> {
        self.variables().find(|v| v.name == name)
    }

    pub fn is_controlled(&self, var: &str) -> bool {
        self.controlled.iter().any(|v| v.name == var)
    }

    pub fn validate(&self) -> Vec<ModelError> {
        let mut errors = validate_variables(self.variables());
        for rule in self.system_rules.iter().chain(&self.domain_rules) {
            errors.extend(validate_rule(rule, |name| self.variable(name)));
        }
        errors
    }

    /// `(SV_C ∪ SV_E, S)`.
    pub fn system_problem(&self) -> PlanningProblem {
        PlanningProblem { variables: self.variables().cloned().collect(), rules: self.system_rules.clone() }
    }

    /// `(SV_C ∪ SV_E, D)`.
    pub fn domain_problem(&self) -> PlanningProblem {
        PlanningProblem { variables: self.variables().cloned().collect(), rules: self.domain_rules.clone() }
    }

    /// The player allowed to play `action`: starts belong to the owner of
    /// the variable, ends to whoever controls the value.
    pub fn owner_of(&self, action: &Action) -> Option<Player> {
        let var = self.variable(&action.var)?;
        let value = var.value(&action.value)?;
        Some(match action.kind {
            Endpoint::Start if self.is_controlled(&var.name) => Player::Charlie,
            Endpoint::Start => Player::Eve,
            Endpoint::End => match value.tag {
                Tag::Controllable => Player::Charlie,
                Tag::Uncontrollable => Player::Eve,
            },
        })
    }

    /// All actions of the game, split between the two players.
    pub fn partition_actions(&self) -> (BTreeSet<Action>, BTreeSet<Action>) {
        let mut charlie = BTreeSet::new();
        let mut eve = BTreeSet::new();
        for var in self.variables() {
            for value in &var.values {
                for action in [Action::start(&var.name, &value.name), Action::end(&var.name, &value.name)] {
                    match self.owner_of(&action) {
                        Some(Player::Charlie) => charlie.insert(action),
                        _ => eve.insert(action),
                    };
                }
            }
        }
        (charlie, eve)
    }
}
