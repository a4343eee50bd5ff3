//! Browser bindings. Every export takes text and returns a JSON string;
//! errors come back as `{"error": ...}` so the page never has to catch.

use serde_json::{json, Value};
use tlsynth::arena::{accepts_game, Arena};
use tlsynth::automaton::Policy;
use tlsynth::dbm::window;
use tlsynth::io;
use tlsynth::lang::{desugar_goals, lift_goals, parse_game, SpecSource};
use tlsynth::model::{normalize_gaps, validate_event_sequence, Game};
use tlsynth::oracle::is_successful;
use tlsynth::solver::{simulate, synthesize, Seeded};
use wasm_bindgen::prelude::*;

/// Arena budget for the page; the satellite example needs about 65k states.
pub const MAX_STATES: usize = 300_000;

fn load(spec: &str) -> Result<(Game, Vec<Value>), Value> {
    let to_json = |d: &tlsynth::lang::Diagnostic| {
        json!({ "severity": d.severity.to_string(), "line": d.line, "column": d.column, "message": d.message })
    };
    match parse_game(&SpecSource::new(spec, "spec")) {
        Ok(p) => Ok((p.game, p.warnings.iter().map(to_json).collect())),
        Err(diags) => Err(json!({ "error": "parse", "diagnostics": diags.iter().map(to_json).collect::<Vec<_>>() })),
    }
}

fn error(message: impl ToString) -> Value {
    json!({ "error": message.to_string() })
}

pub fn analyze_json(spec: &str) -> Value {
    let (game, warnings) = match load(spec) {
        Ok(x) => x,
        Err(e) => return e,
    };
    let full = desugar_goals(&game);
    let d = match Arena::new(&game, Policy::default()) {
        Ok(a) => a.d(),
        Err(e) => return error(e),
    };
    json!({
        "warnings": warnings,
        "controlled": game.controlled.iter().map(|v| v.name.clone()).collect::<Vec<_>>(),
        "external": game.external.iter().map(|v| v.name.clone()).collect::<Vec<_>>(),
        "system_rules": game.system_rules.len(),
        "domain_rules": game.domain_rules.len(),
        "window_system": window(&full.system_problem()),
        "window_domain": window(&full.domain_problem()),
        "d": d,
        "game_hash": io::game_hash(&game),
    })
}

/// Solves the game; when Charlie wins, also plays the strategy against a
/// random Eve seeded with `seed`.
pub fn synthesize_json(spec: &str, seed: u64, horizon: usize) -> Value {
    let game = match load(spec) {
        Ok((g, _)) => g,
        Err(e) => return e,
    };
    let s = match synthesize(&game, Policy::default(), MAX_STATES) {
        Ok(s) => s,
        Err(e) => return error(e),
    };
    let mut out = json!({
        "charlie_wins": s.charlie_wins(),
        "arena_states": s.graph.len(),
        "winning_states": s.attractor.region_size(),
        "stationary_index": s.attractor.stationary_index(),
        "initial_level": s.initial_level(),
    });
    if s.charlie_wins() {
        out["strategy"] = serde_json::from_str(&io::write_strategy(&s)).expect("strategy JSON");
        match simulate(&s, &mut Seeded::new(seed), horizon) {
            Ok(t) => {
                // The verdict serializes as {"verdict": ..., ...}; the rest is added beside it.
                let mut sim = serde_json::to_value(&t.verdict).expect("verdict JSON");
                sim["rounds"] = json!(t.rounds.iter().map(|r| r.to_string()).collect::<Vec<_>>());
                sim["plan"] = json!(t.plan.to_string());
                out["simulation"] = sim;
            }
            Err(e) => out["simulation"] = error(e),
        }
    }
    out
}

/// Verdict of the oracle and of the game automaton on a plan file.
pub fn validate_json(spec: &str, plan: &str) -> Value {
    let game = match load(spec) {
        Ok((g, _)) => g,
        Err(e) => return e,
    };
    let plan = match io::read_plan(plan) {
        Ok(p) => p,
        Err(e) => return error(e),
    };
    let vars: Vec<_> = game.variables().cloned().collect();
    if let Err(e) = validate_event_sequence(&plan, &vars) {
        return error(e);
    }
    let oracle = is_successful(&game, &plan);
    let automaton = Arena::new(&game, Policy::default()).map_err(|e| e.to_string()).and_then(|mut arena| {
        let word = normalize_gaps(&lift_goals(&plan, &game), arena.d()).map_err(|e| e.to_string())?;
        accepts_game(&mut arena, &word).map_err(|e| e.to_string())
    });
    match automaton {
        Ok(a) => json!({ "plan": plan.to_string(), "oracle": oracle, "automaton": a }),
        Err(e) => error(e),
    }
}

#[wasm_bindgen]
pub fn analyze(spec: &str) -> String {
    analyze_json(spec).to_string()
}

#[wasm_bindgen]
pub fn solve(spec: &str, seed: u32, horizon: u32) -> String {
    synthesize_json(spec, seed.into(), horizon as usize).to_string()
}

#[wasm_bindgen]
pub fn validate(spec: &str, plan: &str) -> String {
    validate_json(spec, plan).to_string()
}
