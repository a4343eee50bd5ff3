use super::*;
use crate::model::{Endpoint, EventSequence, Upper};
use crate::oracle::{enumerate_closed_sequences, is_solution};

const SATELLITE: &str = include_str!("../../../../specs/satellite.tg");

fn parse(text: &str) -> Result<Game, Vec<Diagnostic>> {
    parse_game(&SpecSource::new(text, "test.tg")).map(|p| p.game)
}

#[test]
fn satellite_rules_have_the_expected_shape() {
    let game = parse(SATELLITE).unwrap();
    let comm = &game.system_rules[0];
    assert_eq!(comm.statements.len(), 1);
    assert_eq!(comm.statements[0].quantifiers.len(), 1);
    assert_eq!(comm.statements[0].atoms.len(), 2);
    for atom in &comm.statements[0].atoms {
        assert_eq!((atom.lower, atom.upper), (0, Upper::Infinite));
    }
    let science = &game.system_rules[1];
    assert_eq!(science.statements[0].quantifiers.len(), 3);
    assert_eq!(science.statements[0].atoms.len(), 3);
    for atom in &science.statements[0].atoms {
        assert_eq!((atom.lower, atom.upper), (0, Upper::Finite(0)));
        assert_eq!((atom.lhs.endpoint, atom.rhs.endpoint), (Endpoint::End, Endpoint::Start));
    }
    assert!(game.system_rules[2].trigger.is_none());
}

#[test]
fn empty_spec_is_an_empty_game() {
    let game = parse("# nothing here\n").unwrap();
    assert!(game.controlled.is_empty() && game.system_rules.is_empty() && game.domain_rules.is_empty());
}

#[test]
fn unknown_value_is_a_single_positioned_error() {
    let text = SATELLITE.replace("a[x_s=Comm] =>", "a[x_s=Comm2] =>");
    let diags = parse(&text).unwrap_err();
    assert_eq!(diags.len(), 1, "{diags:?}");
    let d = &diags[0];
    assert_eq!(d.severity, Severity::Error);
    assert!(d.message.contains("Comm2"));
    let line = text.lines().position(|l| l.contains("Comm2")).unwrap() + 1;
    let col = text.lines().nth(line - 1).unwrap().find("Comm2").unwrap() + 1;
    assert_eq!((d.line, d.column), (line, col));
    assert_eq!(d.render("sat.tg"), format!("sat.tg:{line}:{col}: error: {}", d.message));
}

#[test]
fn static_errors() {
    let base = "controlled var x { values p, q; }\n";
    let cases = [
        ("system rule r: a[x=p] => exists b[x=q] b[x=p];", "more than once"),
        ("system rule r: a[x=p] => exists a[x=q];", "more than once"),
        ("system rule r: a[x=p] => exists b[x=q]. end(a) <=[3, 2] start(b);", "exceeds"),
        ("system rule r: a[x=p] => exists b[x=q]. end(c) <= start(b);", "not quantified"),
        ("system rule r: a[y=p] => true;", "unknown variable"),
    ];
    for (rule, needle) in cases {
        let diags = parse(&format!("{base}{rule}")).unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains(needle)), "{rule}: {diags:?}");
    }
    let durations = [("[0, 3]", "at least 1"), ("[4, 3]", "exceeds")];
    for (d, needle) in durations {
        let diags = parse(&format!("controlled var x {{ values p; duration p {d}; }}")).unwrap_err();
        assert!(diags[0].message.contains(needle), "{diags:?}");
    }
}

#[test]
fn syntax_errors_are_positioned_and_recovered() {
    let text = "controlled var x { values p }\nsystem rule r a[x=p] => true;\n";
    let diags = parse(text).unwrap_err();
    assert_eq!(diags.len(), 2, "{diags:?}");
    assert_eq!((diags[0].line, diags[0].column), (1, 29));
    assert_eq!(diags[1].line, 2);
}

#[test]
fn defaults() {
    let game = parse("external var y { values on; }").unwrap();
    let v = &game.external[0].values[0];
    assert_eq!((v.min_duration, v.max_duration), (1, Upper::Infinite));
    assert!(v.successors.is_empty());
    assert_eq!(v.tag, crate::model::Tag::Controllable);
}

#[test]
fn print_parse_round_trip() {
    let game = parse(SATELLITE).unwrap();
    let printed = print_game(&game);
    assert_eq!(parse(&printed).unwrap(), game);
    let desugared = desugar_goals(&game);
    let printed = print_game(&desugared);
    assert_eq!(parse(&printed).unwrap_or_else(|d| panic!("{printed}\n{d:?}")), desugared);
    let bounds = "controlled var x { values p, q; }\nsystem rule r: a[x=p] => exists b[x=q]. end(a) <=[2, inf] start(b) && start(a) <=[1, 4] end(b) | true. end(a) = end(a);";
    let game = parse(bounds).unwrap();
    assert_eq!(parse(&print_game(&game)).unwrap(), game);
}

#[test]
fn goal_translation() {
    let game = parse(SATELLITE).unwrap();
    let out = desugar_goals(&game);
    let x_goal = out.controlled.last().unwrap();
    assert_eq!(x_goal.name, GOAL_VARIABLE);
    assert_eq!(x_goal.values.len(), 1);
    let goal = &out.system_rules[2];
    let trigger = goal.trigger.as_ref().unwrap();
    assert_eq!((trigger.var.as_str(), trigger.value.as_str()), (GOAL_VARIABLE, GOAL_VALUE));
    assert_eq!(goal.statements, game.system_rules[2].statements);
    assert_eq!(desugar_goals(&out), out);
    assert_eq!(desugar_goals(&desugar_goals(&game)), out);
}

#[test]
fn no_goals_is_identity_and_two_goals_share_a_variable() {
    let plain = "controlled var x { values p; }\nsystem rule r: a[x=p] => true;";
    let game = parse(plain).unwrap();
    assert_eq!(desugar_goals(&game), game);
    let two = "controlled var x { values p, q; transitions p -> q; }\ngoal: exists a[x=p];\ndomain goal: exists a[x=q];";
    let out = desugar_goals(&parse(two).unwrap());
    assert_eq!(out.controlled.len(), 2);
    let triggers: Vec<_> =
        out.system_rules.iter().chain(&out.domain_rules).map(|r| r.trigger.as_ref().unwrap().var.clone()).collect();
    assert_eq!(triggers, vec![GOAL_VARIABLE.to_string(), GOAL_VARIABLE.to_string()]);
}

fn project(seq: &EventSequence, var: &str) -> EventSequence {
    let mut out = seq.clone();
    for e in &mut out.events {
        e.actions.retain(|a| a.var != var);
    }
    out
}

#[test]
fn goal_translation_preserves_solutions() {
    let text = "controlled var x { values p, q; transitions p -> q; transitions q -> p; duration p [1, 2]; }\n\
                goal: exists a[x=q] b[x=p]. end(b) = start(a);\n\
                goal: exists a[x=p]. start(a) <=[0, 0] start(a);";
    let game = parse(text).unwrap();
    let problem = game.system_problem();
    let sugared = desugar_problem(&problem);
    let seqs = enumerate_closed_sequences(&sugared.variables, 4, 3, 1_000_000).unwrap();
    let mentions_goal = |s: &EventSequence| s.events[0].start_of(GOAL_VARIABLE).is_some();
    assert!(!seqs.is_empty());
    let mut solutions = 0;
    for seq in seqs.iter().filter(|s| mentions_goal(s)) {
        let translated = is_solution(&sugared, seq);
        assert_eq!(translated, is_solution(&problem, &project(seq, GOAL_VARIABLE)), "{seq}");
        solutions += translated as usize;
    }
    assert!(solutions > 0);
}

#[test]
fn lifted_plans_keep_their_verdict() {
    let text = "controlled var x { values p, q; transitions p -> q; transitions q -> p; duration p [1, 2]; }\n\
                goal: exists a[x=q];";
    let game = parse(text).unwrap();
    let problem = game.system_problem();
    let sugared = desugar_problem(&problem);
    let seqs = enumerate_closed_sequences(&problem.variables, 4, 2, 1_000_000).unwrap();
    for seq in seqs.iter().filter(|s| s.events.len() > 1) {
        let lifted = lift_goals(seq, &game);
        assert_eq!(project(&lifted, GOAL_VARIABLE), *seq);
        assert_eq!(is_solution(&sugared, &lifted), is_solution(&problem, seq), "{seq}");
        assert_eq!(lift_goals(&lifted, &game), lifted);
    }
}
