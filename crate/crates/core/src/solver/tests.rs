use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gen::{random_game, Limits};
use crate::lang::parse_game_str;
use crate::model::{Action, Endpoint};

const SATELLITE: &str = include_str!("../../../../specs/satellite.tg");
const UNSAT_DOMAIN: &str = include_str!("../../../../specs/unsat_domain.tg");
const EXACT_TIME: &str = include_str!("../../../../specs/exact_time.tg");
const EMPTY_RULES: &str = include_str!("../../../../specs/empty_rules.tg");

fn solve(text: &str) -> Solution {
    synthesize(&parse_game_str(text).unwrap(), Policy::default(), 1_000_000).unwrap()
}

fn minimax_agrees(s: &Solution) -> bool {
    let mut m = Minimax::new(&s.graph);
    m.wins(s.arena.initial(), s.graph.len() as u32) == s.charlie_wins()
}

#[test]
fn final_initial_state_has_level_zero() {
    let game = Game { controlled: vec![], external: vec![], system_rules: vec![], domain_rules: vec![] };
    let s = synthesize(&game, Policy::default(), 100).unwrap();
    assert_eq!(s.initial_level(), Some(0));
    assert!(s.strategy.moves.is_empty());
}

#[test]
fn fixtures_have_the_expected_winner() {
    with_big_stack(|| {
        for (text, charlie) in [(UNSAT_DOMAIN, true), (EXACT_TIME, false), (EMPTY_RULES, true), (SATELLITE, true)] {
        let s = solve(text);
        assert_eq!(s.charlie_wins(), charlie, "{text}");
        assert!(minimax_agrees(&s));
        assert_eq!(check_invariants(&s.graph, &s.attractor, &s.strategy), Vec::<String>::new());
        }
    })
}

#[test]
fn worklist_matches_the_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let game = random_game(&mut rng, &Limits { constant: 2, ..Limits::default() });
        let s = synthesize(&game, Policy::default(), 200_000).unwrap();
        assert_eq!(attractor_naive(&s.graph), s.attractor);
        assert!(minimax_agrees(&s));
        assert!(check_invariants(&s.graph, &s.attractor, &s.strategy).is_empty());
    }
}

#[test]
fn eve_states_with_a_losing_successor_lose() {
    let s = solve(EXACT_TIME);
    for q in 0..s.graph.len() {
        if s.graph.owner[q] == Player::Eve && s.graph.edges[q].iter().any(|&(_, r)| !s.attractor.wins(r)) {
            assert!(!s.attractor.wins(q) || s.graph.finals[q]);
        }
    }
}

#[test]
fn strategy_picks_the_lowest_level_then_the_least_label() {
    let s = solve(SATELLITE);
    for (&q, m) in &s.strategy.moves {
        let best = s.graph.edges[q]
            .iter()
            .filter_map(|(mv, r)| s.attractor.level[*r].map(|l| (l, s.arena.label(mv))))
            .min()
            .unwrap();
        assert_eq!(best.1, s.arena.label(m));
    }
}

#[test]
fn strategy_survives_every_eve() {
    for text in [SATELLITE, UNSAT_DOMAIN, EMPTY_RULES] {
        let s = solve(text);
        assert_eq!(defeat(&s.graph, &s.strategy, s.arena.initial()), None);
    }
}

#[test]
fn losing_games_have_a_spoiler() {
    let s = solve(EXACT_TIME);
    let mut m = Minimax::new(&s.graph);
    let policy = m.spoiler(s.arena.initial()).unwrap();
    let reach = reachable_under(&s.graph, s.arena.initial(), &policy);
    assert!(reach.iter().all(|&q| !s.graph.finals[q]));
}

#[test]
fn horizon_zero_is_an_empty_transcript() {
    let s = solve(SATELLITE);
    let t = simulate(&s, &mut Seeded::new(0), 0).unwrap();
    assert!(t.rounds.is_empty());
    assert_eq!(t.verdict, Verdict::AdmissibleButUnfinished);
}

#[test]
fn random_eves_always_lose_against_the_strategy() {
    for text in [SATELLITE, UNSAT_DOMAIN, EMPTY_RULES] {
        let s = solve(text);
        // Every round takes at least two arena moves.
        let bound = s.initial_level().unwrap() as usize;
        for seed in 0..200 {
            let t = simulate(&s, &mut Seeded::new(seed), bound).unwrap();
            assert!(matches!(t.verdict, Verdict::Success | Verdict::EveInadmissible { .. }), "{seed}: {:?}", t.verdict);
        }
    }
}

#[test]
fn transcripts_replay_on_the_arena() {
    let mut s = solve(SATELLITE);
    let t = simulate(&s, &mut Seeded::new(5), 100).unwrap();
    assert_eq!(t.verdict, Verdict::Success);
    let moves = s.arena.moves_of_rounds(&t.rounds).unwrap();
    let q = s.arena.read_play(&moves).unwrap();
    assert!(s.graph.finals[q]);
    assert!(crate::oracle::is_successful(s.arena.game(), &t.plan));
}

struct EndsEarly;

impl EvePolicy for EndsEarly {
    fn choose(&mut self, _: usize, _: &CharlieMove, options: &[EveMove]) -> Result<EveMove, String> {
        let ends = |m: &&EveMove| m.actions().iter().any(|a| a.kind == Endpoint::End);
        options.iter().find(ends).or(options.first()).cloned().ok_or_else(|| "no options".into())
    }
}

#[test]
fn breaking_a_domain_rule_is_reported() {
    let s = solve(UNSAT_DOMAIN);
    let t = simulate(&s, &mut EndsEarly, 10).unwrap();
    // Charlie closes the plan in the round Eve breaks the rule.
    assert_eq!(t.verdict, Verdict::Success);
    assert_eq!(violated_domain_rule(&s.arena, &t.plan), Some("long".to_string()));
    assert!(!crate::oracle::satisfies_rules(&s.arena.game().domain_problem(), &t.plan));
}

#[test]
fn eve_breaking_a_domain_rule_early_is_inadmissible() {
    let text = "controlled var x { values p; duration p [4, 4]; }
                external var y { values w; transitions w -> w; duration w [1, 2]; uncontrollable w; }
                domain rule long: a[y=w] => true. start(a) <=[5, 5] end(a);";
    let s = solve(text);
    assert!(s.charlie_wins());
    let t = simulate(&s, &mut EndsEarly, 10).unwrap();
    assert_eq!(t.verdict, Verdict::EveInadmissible { rule: "long".into() });
    assert!(!crate::oracle::satisfies_rules(&s.arena.game().domain_problem(), &t.plan));
}

#[test]
fn inapplicable_scripted_moves_name_the_round() {
    let s = solve(UNSAT_DOMAIN);
    let script = vec![EveMove::Play([Action::start("y", "nope")].into())];
    let err = simulate(&s, &mut Scripted(script.into()), 10).unwrap_err();
    assert!(matches!(err, SimulateError::Control(ControlError::NotApplicable { round: 0, .. })), "{err}");
}
