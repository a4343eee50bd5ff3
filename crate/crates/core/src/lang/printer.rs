use std::fmt::Write;

use crate::model::{Atom, Game, Rule, StateVariable, Statement, Tag, Upper};

fn bound(u: Upper) -> String {
    match u {
        Upper::Finite(n) => n.to_string(),
        Upper::Infinite => "inf".into(),
    }
}

fn var(out: &mut String, kind: &str, v: &StateVariable) {
    let _ = writeln!(out, "{kind} var {} {{", v.name);
    let names: Vec<&str> = v.values.iter().map(|x| x.name.as_str()).collect();
    let _ = writeln!(out, "  values {};", names.join(", "));
    for x in &v.values {
        if !x.successors.is_empty() {
            let succ: Vec<&str> = x.successors.iter().map(String::as_str).collect();
            let _ = writeln!(out, "  transitions {} -> {};", x.name, succ.join(", "));
        }
    }
    for x in &v.values {
        if x.min_duration != 1 || x.max_duration != Upper::Infinite {
            let _ = writeln!(out, "  duration {} [{}, {}];", x.name, x.min_duration, bound(x.max_duration));
        }
    }
    let unc: Vec<&str> = v.values.iter().filter(|x| x.tag == Tag::Uncontrollable).map(|x| x.name.as_str()).collect();
    if !unc.is_empty() {
        let _ = writeln!(out, "  uncontrollable {};", unc.join(", "));
    }
    out.push_str("}\n");
}

fn atom(a: &Atom) -> String {
    let rel = match (a.lower, a.upper) {
        (0, Upper::Finite(0)) => "=".to_string(),
        (0, Upper::Infinite) => "<=".to_string(),
        (l, u) => format!("<=[{l}, {}]", bound(u)),
    };
    format!("{}({}) {rel} {}({})", a.lhs.endpoint, a.lhs.token, a.rhs.endpoint, a.rhs.token)
}

fn statement(s: &Statement) -> String {
    let mut out = if s.quantifiers.is_empty() {
        "true".to_string()
    } else {
        let qs: Vec<String> = s.quantifiers.iter().map(|q| format!("{}[{}={}]", q.token, q.var, q.value)).collect();
        format!("exists {}", qs.join(" "))
    };
    if !s.atoms.is_empty() {
        let atoms: Vec<String> = s.atoms.iter().map(atom).collect();
        let _ = write!(out, ". {}", atoms.join(" && "));
    }
    out
}

/// One rule in `.tg` syntax, `side` being `system` or `domain`.
pub fn print_rule(side: &str, rule: &Rule) -> String {
    let body: Vec<String> = rule.statements.iter().map(statement).collect();
    match &rule.trigger {
        Some(t) => format!("{side} rule {}: {}[{}={}] => {};", rule.name, t.token, t.var, t.value, body.join(" | ")),
        None => format!("{side} goal {}: {};", rule.name, body.join(" | ")),
    }
}

/// Pretty-prints a game; parsing the output yields the same game.
pub fn print_game(game: &Game) -> String {
    let mut out = String::new();
    for v in &game.controlled {
        var(&mut out, "controlled", v);
    }
    for v in &game.external {
        var(&mut out, "external", v);
    }
    for r in &game.system_rules {
        out.push_str(&print_rule("system", r));
        out.push('\n');
    }
    for r in &game.domain_rules {
        out.push_str(&print_rule("domain", r));
        out.push('\n');
    }
    out
}
