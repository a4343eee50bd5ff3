use std::collections::{BTreeSet, HashMap, HashSet};

use super::lexer::{lex, Pos, Spanned, Tok};
use super::{Diagnostic, Severity};
use crate::model::{Atom, Endpoint, Game, Quantifier, Rule, StateVariable, Statement, Tag, Term, Upper, Value};

const KEYWORDS: &[&str] = &[
    "controlled",
    "external",
    "var",
    "values",
    "transitions",
    "duration",
    "uncontrollable",
    "system",
    "domain",
    "rule",
    "goal",
    "exists",
    "true",
    "start",
    "end",
    "inf",
];

#[derive(Debug)]
struct Name {
    text: String,
    pos: Pos,
}

#[derive(Debug)]
struct VarDecl {
    controlled: bool,
    name: Name,
    values: Vec<Name>,
    transitions: Vec<(Name, Vec<Name>)>,
    durations: Vec<(Name, u64, Upper, Pos)>,
    uncontrollable: Vec<Name>,
}

#[derive(Debug)]
struct QuantDecl {
    token: Name,
    var: Name,
    value: Name,
}

#[derive(Debug)]
struct AtomDecl {
    lhs: (Endpoint, Name),
    rhs: (Endpoint, Name),
    lower: u64,
    upper: Upper,
    pos: Pos,
}

#[derive(Debug)]
struct StmtDecl {
    quantifiers: Vec<QuantDecl>,
    atoms: Vec<AtomDecl>,
}

#[derive(Debug)]
struct RuleDecl {
    system: bool,
    name: Option<Name>,
    pos: Pos,
    trigger: Option<QuantDecl>,
    statements: Vec<StmtDecl>,
}

#[derive(Debug, Default)]
struct Ast {
    vars: Vec<VarDecl>,
    rules: Vec<RuleDecl>,
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.i]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.i].clone();
        if t.tok != Tok::Eof {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, what: &str) -> PResult<T> {
        let t = self.peek();
        Err(Diagnostic::error(t.pos, format!("expected {what}, found {}", t.tok)))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Pos> {
        if self.at_kw(kw) {
            Ok(self.bump().pos)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if self.peek().tok == tok {
            Ok(self.bump().pos)
        } else {
            self.error(&tok.to_string())
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                let Tok::Ident(text) = t.tok else { unreachable!() };
                Ok(Name { text, pos: t.pos })
            }
            _ => self.error(what),
        }
    }

    fn number(&mut self) -> PResult<u64> {
        match self.peek().tok {
            Tok::Number(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.error("a number"),
        }
    }

    fn bound(&mut self) -> PResult<Upper> {
        if self.eat_kw("inf") {
            Ok(Upper::Infinite)
        } else {
            Ok(Upper::Finite(self.number()?))
        }
    }

    fn names(&mut self, what: &str) -> PResult<Vec<Name>> {
        let mut out = vec![self.name(what)?];
        while self.eat(&Tok::Comma) {
            out.push(self.name(what)?);
        }
        Ok(out)
    }

    fn spec(&mut self, diags: &mut Vec<Diagnostic>) -> Ast {
        let mut ast = Ast::default();
        while self.peek().tok != Tok::Eof {
            if let Err(d) = self.item(&mut ast) {
                diags.push(d);
                self.recover();
            }
        }
        ast
    }

    /// Skips to the next plausible item start.
    fn recover(&mut self) {
        loop {
            let t = self.bump();
            if matches!(t.tok, Tok::Semi | Tok::RBrace | Tok::Eof) {
                let next = &self.peek().tok;
                let top = ["controlled", "external", "system", "domain", "goal"];
                if *next == Tok::Eof || top.iter().any(|k| matches!(next, Tok::Ident(s) if s == k)) {
                    return;
                }
            }
        }
    }

    fn item(&mut self, ast: &mut Ast) -> PResult<()> {
        let pos = self.peek().pos;
        if self.at_kw("controlled") || self.at_kw("external") {
            let controlled = self.at_kw("controlled");
            self.bump();
            ast.vars.push(self.var_decl(controlled)?);
            return Ok(());
        }
        let system = if self.eat_kw("domain") {
            false
        } else {
            self.eat_kw("system");
            true
        };
        if self.eat_kw("rule") {
            let name = self.name("a rule name")?;
            self.expect(Tok::Colon)?;
            let trigger = self.quantifier()?;
            self.expect(Tok::FatArrow)?;
            let statements = self.body()?;
            self.expect(Tok::Semi)?;
            ast.rules.push(RuleDecl { system, name: Some(name), pos, trigger: Some(trigger), statements });
        } else if self.eat_kw("goal") {
            let name = if self.peek().tok == Tok::Colon { None } else { Some(self.name("a goal name or `:`")?) };
            self.expect(Tok::Colon)?;
            let statements = self.body()?;
            self.expect(Tok::Semi)?;
            ast.rules.push(RuleDecl { system, name, pos, trigger: None, statements });
        } else {
            return self.error("a variable, rule or goal declaration");
        }
        Ok(())
    }

    fn var_decl(&mut self, controlled: bool) -> PResult<VarDecl> {
        self.expect_kw("var")?;
        let name = self.name("a variable name")?;
        self.expect(Tok::LBrace)?;
        let mut decl =
            VarDecl { controlled, name, values: vec![], transitions: vec![], durations: vec![], uncontrollable: vec![] };
        while !self.eat(&Tok::RBrace) {
            if self.eat_kw("values") {
                decl.values.extend(self.names("a value name")?);
            } else if self.eat_kw("transitions") {
                let from = self.name("a value name")?;
                self.expect(Tok::Arrow)?;
                let to = if self.peek().tok == Tok::Semi { vec![] } else { self.names("a value name")? };
                decl.transitions.push((from, to));
            } else if self.eat_kw("duration") {
                let value = self.name("a value name")?;
                let pos = self.expect(Tok::LBracket)?;
                let min = self.number()?;
                self.expect(Tok::Comma)?;
                let max = self.bound()?;
                self.expect(Tok::RBracket)?;
                decl.durations.push((value, min, max, pos));
            } else if self.eat_kw("uncontrollable") {
                decl.uncontrollable.extend(self.names("a value name")?);
            } else {
                return self.error("`values`, `transitions`, `duration`, `uncontrollable` or `}`");
            }
            self.expect(Tok::Semi)?;
        }
        Ok(decl)
    }

    fn quantifier(&mut self) -> PResult<QuantDecl> {
        let token = self.name("a token name")?;
        self.expect(Tok::LBracket)?;
        let var = self.name("a variable name")?;
        self.expect(Tok::Eq)?;
        let value = self.name("a value name")?;
        self.expect(Tok::RBracket)?;
        Ok(QuantDecl { token, var, value })
    }

    fn body(&mut self) -> PResult<Vec<StmtDecl>> {
        let mut out = vec![self.statement()?];
        while self.eat(&Tok::Pipe) {
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> PResult<StmtDecl> {
        let mut quantifiers = Vec::new();
        if self.eat_kw("exists") {
            quantifiers.push(self.quantifier()?);
            while matches!(self.peek().tok, Tok::Ident(_)) {
                quantifiers.push(self.quantifier()?);
            }
        } else if !self.eat_kw("true") {
            return self.error("`exists` or `true`");
        }
        let mut atoms = Vec::new();
        if self.eat(&Tok::Dot) {
            atoms.push(self.atom()?);
            while self.eat(&Tok::AndAnd) {
                atoms.push(self.atom()?);
            }
        }
        Ok(StmtDecl { quantifiers, atoms })
    }

    fn term(&mut self) -> PResult<(Endpoint, Name)> {
        let endpoint = if self.eat_kw("start") {
            Endpoint::Start
        } else if self.eat_kw("end") {
            Endpoint::End
        } else {
            return self.error("`start` or `end`");
        };
        self.expect(Tok::LParen)?;
        let name = self.name("a token name")?;
        self.expect(Tok::RParen)?;
        Ok((endpoint, name))
    }

    fn atom(&mut self) -> PResult<AtomDecl> {
        let pos = self.peek().pos;
        let lhs = self.term()?;
        let (lower, upper) = if self.eat(&Tok::Eq) {
            (0, Upper::Finite(0))
        } else if self.eat(&Tok::Le) {
            if self.eat(&Tok::LBracket) {
                let l = self.number()?;
                self.expect(Tok::Comma)?;
                let u = self.bound()?;
                self.expect(Tok::RBracket)?;
                (l, u)
            } else {
                (0, Upper::Infinite)
            }
        } else {
            return self.error("`<=` or `=`");
        };
        let rhs = self.term()?;
        Ok(AtomDecl { lhs, rhs, lower, upper, pos })
    }
}

/// Turns the syntax tree into a game, reporting every semantic error.
fn resolve(ast: Ast, diags: &mut Vec<Diagnostic>) -> Game {
    let mut err = |pos: Pos, msg: String| diags.push(Diagnostic::error(pos, msg));
    let mut game = Game { controlled: vec![], external: vec![], system_rules: vec![], domain_rules: vec![] };
    let mut seen_vars = HashSet::new();
    let mut warnings = Vec::new();
    for decl in &ast.vars {
        if !seen_vars.insert(decl.name.text.clone()) {
            err(decl.name.pos, format!("duplicate variable `{}`", decl.name.text));
            continue;
        }
        if decl.values.is_empty() {
            err(decl.name.pos, format!("variable `{}` has no values", decl.name.text));
        }
        let mut values: Vec<Value> = Vec::new();
        for v in &decl.values {
            if values.iter().any(|x| x.name == v.text) {
                err(v.pos, format!("duplicate value `{}` in variable `{}`", v.text, decl.name.text));
            } else {
                values.push(Value::new(&v.text));
            }
        }
        let index: HashMap<String, usize> = values.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        let lookup = |n: &Name, err: &mut dyn FnMut(Pos, String)| {
            let found = index.get(&n.text).copied();
            if found.is_none() {
                err(n.pos, format!("`{}` is not a value of `{}`", n.text, decl.name.text));
            }
            found
        };
        let mut with_transitions = HashSet::new();
        for (from, to) in &decl.transitions {
            let Some(i) = lookup(from, &mut err) else { continue };
            if !with_transitions.insert(i) {
                err(from.pos, format!("transitions of `{}` are declared twice", from.text));
                continue;
            }
            let mut succ = BTreeSet::new();
            for t in to {
                if lookup(t, &mut err).is_some() && !succ.insert(t.text.clone()) {
                    warnings.push(Diagnostic::warning(t.pos, format!("successor `{}` listed twice", t.text)));
                }
            }
            values[i].successors = succ;
        }
        let mut with_duration = HashSet::new();
        for (value, min, max, pos) in &decl.durations {
            let Some(i) = lookup(value, &mut err) else { continue };
            if !with_duration.insert(i) {
                err(value.pos, format!("duration of `{}` is declared twice", value.text));
                continue;
            }
            if *min == 0 {
                err(*pos, format!("minimum duration of `{}` must be at least 1", value.text));
            }
            if let Upper::Finite(m) = max {
                if min > m {
                    err(*pos, format!("duration of `{}`: minimum {min} exceeds maximum {m}", value.text));
                }
            }
            values[i].min_duration = *min;
            values[i].max_duration = *max;
        }
        for v in &decl.uncontrollable {
            if let Some(i) = lookup(v, &mut err) {
                values[i].tag = Tag::Uncontrollable;
            }
        }
        let var = StateVariable { name: decl.name.text.clone(), values };
        if decl.controlled {
            game.controlled.push(var);
        } else {
            game.external.push(var);
        }
    }

    let mut rule_names = HashSet::new();
    let mut goal_count = 0;
    for decl in ast.rules {
        let name = match &decl.name {
            Some(n) => n.text.clone(),
            None => loop {
                goal_count += 1;
                let candidate = format!("goal_{goal_count}");
                if !ast_rule_named(&game, &candidate) && !rule_names.contains(&candidate) {
                    break candidate;
                }
            },
        };
        if !rule_names.insert(name.clone()) {
            err(decl.name.as_ref().map_or(decl.pos, |n| n.pos), format!("duplicate rule `{name}`"));
            continue;
        }
        let quant = |q: &QuantDecl, err: &mut dyn FnMut(Pos, String)| {
            match game.variable(&q.var.text) {
                None => err(q.var.pos, format!("unknown variable `{}`", q.var.text)),
                Some(var) if var.value(&q.value.text).is_none() => {
                    err(q.value.pos, format!("`{}` is not a value of `{}`", q.value.text, q.var.text))
                }
                Some(_) => {}
            }
            Quantifier::new(&q.token.text, &q.var.text, &q.value.text)
        };
        let trigger = decl.trigger.as_ref().map(|q| quant(q, &mut err));
        let mut statements = Vec::new();
        for stmt in &decl.statements {
            let mut bound: HashSet<&str> = HashSet::new();
            if let Some(t) = &decl.trigger {
                bound.insert(&t.token.text);
            }
            let mut quantifiers = Vec::new();
            for q in &stmt.quantifiers {
                if !bound.insert(&q.token.text) {
                    err(q.token.pos, format!("token `{}` is quantified more than once", q.token.text));
                }
                quantifiers.push(quant(q, &mut err));
            }
            let mut atoms = Vec::new();
            for a in &stmt.atoms {
                for (_, n) in [&a.lhs, &a.rhs] {
                    if !bound.contains(n.text.as_str()) {
                        err(n.pos, format!("token `{}` is not quantified", n.text));
                    }
                }
                if let Upper::Finite(u) = a.upper {
                    if a.lower > u {
                        err(a.pos, format!("atom lower bound {} exceeds upper bound {u}", a.lower));
                    }
                }
                let term = |(e, n): &(Endpoint, Name)| Term { endpoint: *e, token: n.text.clone() };
                atoms.push(Atom { lhs: term(&a.lhs), rhs: term(&a.rhs), lower: a.lower, upper: a.upper });
            }
            statements.push(Statement { quantifiers, atoms });
        }
        let rule = Rule { name, trigger, statements };
        if decl.system {
            game.system_rules.push(rule);
        } else {
            game.domain_rules.push(rule);
        }
    }
    diags.extend(warnings);
    game
}

fn ast_rule_named(game: &Game, name: &str) -> bool {
    game.system_rules.iter().chain(&game.domain_rules).any(|r| r.name == name)
}

/// Parses a specification, returning the game or every diagnostic found.
/// Warnings accompany a successful parse.
pub(super) fn parse(text: &str) -> (Option<Game>, Vec<Diagnostic>) {
    let toks = match lex(text) {
        Ok(t) => t,
        Err(e) => return (None, vec![Diagnostic::error(e.pos, e.message)]),
    };
    let mut diags = Vec::new();
    let mut parser = Parser { toks, i: 0 };
    let ast = parser.spec(&mut diags);
    if !diags.is_empty() {
        return (None, diags);
    }
    // Named goals may collide with later rule names; resolve reports it.
    let game = resolve(ast, &mut diags);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return (None, diags);
    }
    // Safety net: anything the positional checks missed.
    let errors = game.validate();
    if !errors.is_empty() {
        diags.extend(errors.into_iter().map(|e| Diagnostic::error(Pos { line: 1, col: 1 }, e.to_string())));
        return (None, diags);
    }
    (Some(game), diags)
}
