//! The `tlsynth` command line.
//!
//! Every command prints a one-line JSON verdict on standard output;
//! diagnostics go to standard error. Exit codes: 0 success (or Charlie
//! wins), 1 parse and usage errors, 2 invalid plan or script input,
//! 10 Eve wins, 20 budget exceeded.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use tlsynth::arena::{accepts_game, Arena};
use tlsynth::automaton::{explore, feasible_symbols, game_automaton, Explorer, Policy};
use tlsynth::dbm::window;
use tlsynth::io;
use tlsynth::lang::{desugar_goals, lift_goals, parse_game, SpecSource};
use tlsynth::model::{normalize_gaps, validate_event_sequence, CharlieMove, EventSequence, EveMove, Game};
use tlsynth::oracle::{extract_tokens, is_successful, satisfies_rules, solution_report};
use tlsynth::solver::{simulate, synthesize, EvePolicy, Scripted, Seeded, Solution, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EVE_WINS: i32 = 10;
pub const EXIT_BUDGET: i32 = 20;

#[derive(Parser, Debug)]
#[command(name = "tlsynth", version, about = "Controller synthesis for timeline-based games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Budget {
    /// Largest number of arena or automaton states to explore.
    #[arg(long, default_value_t = 2_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_states: u64,
    /// Wall-clock limit for synthesis, in seconds.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_seconds: Option<u64>,
    /// Rule automaton bookkeeping.
    #[arg(long, value_enum, default_value_t = PolicyArg::PerTrigger)]
    pub policy: PolicyArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyArg {
    PerTrigger,
    Literal,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::PerTrigger => Policy::PerTrigger,
            PolicyArg::Literal => Policy::Literal,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum What {
    Automaton,
    Arena,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a specification and run the static checks.
    Check { spec: PathBuf },
    /// Evaluate a plan with the semantic oracle.
    Validate { spec: PathBuf, plan: PathBuf },
    /// Evaluate a plan with the game automaton.
    Accepts {
        spec: PathBuf,
        plan: PathBuf,
        #[command(flatten)]
        budget: Budget,
    },
    /// Solve the game and write Charlie's strategy.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Play a strategy against a scripted, random or interactive Eve.
    Simulate {
        spec: PathBuf,
        strategy: PathBuf,
        #[arg(long, group = "eve")]
        script: Option<PathBuf>,
        #[arg(long, group = "eve")]
        seed: Option<u64>,
        #[arg(long, group = "eve")]
        interactive: bool,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Where to write the transcript.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Write the game automaton or the arena.
    Export {
        spec: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Sizes of the constructions.
    Stats {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        budget: Budget,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Failure {
        match e {
            SynthError::Budget(_) => fail(EXIT_BUDGET, e.to_string()),
            SynthError::Build(_) => fail(EXIT_USAGE, e.to_string()),
        }
    }
}

/// Standard streams, replaceable in tests.
pub struct Streams<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

fn read(path: &Path, streams: &mut Streams) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::Read::read_to_string(&mut streams.stdin, &mut text)
            .map_err(|e| fail(EXIT_USAGE, format!("<stdin>: {e}")))?;
        return Ok(text);
    }
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load_game(path: &Path, streams: &mut Streams) -> Result<Game, Failure> {
    let text = read(path, streams)?;
    let origin = if path == Path::new("-") { "<stdin>".to_string() } else { path.display().to_string() };
    match parse_game(&SpecSource::new(text, origin.clone())) {
        Ok(parsed) => {
            for w in &parsed.warnings {
                let _ = writeln!(streams.stderr, "{}", w.render(&origin));
            }
            Ok(parsed.game)
        }
        Err(diags) => {
            let rendered: Vec<String> = diags.iter().map(|d| d.render(&origin)).collect();
            Err(fail(EXIT_USAGE, rendered.join("\n")))
        }
    }
}

fn load_plan(path: &Path, game: &Game, streams: &mut Streams) -> Result<EventSequence, Failure> {
    let text = read(path, streams)?;
    let plan = io::read_plan(&text).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    let vars: Vec<_> = game.variables().cloned().collect();
    validate_event_sequence(&plan, &vars).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    Ok(plan)
}

/// Runs synthesis, on a separate thread when a time limit is set.
fn solve(game: &Game, budget: &Budget) -> Result<Solution, Failure> {
    let policy = Policy::from(budget.policy);
    let max = budget.max_states as usize;
    let Some(secs) = budget.max_seconds else {
        return Ok(synthesize(game, policy, max)?);
    };
    let (tx, rx) = mpsc::channel();
    let game = game.clone();
    std::thread::spawn(move || {
        let _ = tx.send(synthesize(&game, policy, max));
    });
    match rx.recv_timeout(Duration::from_secs(secs)) {
        Ok(result) => Ok(result?),
        Err(_) => Err(fail(EXIT_BUDGET, format!("synthesis exceeded {secs} s"))),
    }
}

fn emit(streams: &mut Streams, value: Json) {
    let _ = writeln!(streams.stdout, "{value}");
}

fn check(spec: &Path, streams: &mut Streams) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let full = desugar_goals(&game);
    let goals = game.system_rules.iter().chain(&game.domain_rules).filter(|r| r.trigger.is_none()).count();
    emit(
        streams,
        json!({
            "command": "check",
            "ok": true,
            "controlled": game.controlled.len(),
            "external": game.external.len(),
            "system_rules": game.system_rules.len(),
            "domain_rules": game.domain_rules.len(),
            "goals": goals,
            "window_system": window(&full.system_problem()),
            "window_domain": window(&full.domain_problem()),
            "game_hash": io::game_hash(&game),
        }),
    );
    Ok(EXIT_OK)
}

fn validate(spec: &Path, plan: &Path, streams: &mut Streams) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let plan = load_plan(plan, &game, streams)?;
    let system = solution_report(&game.system_problem(), &plan);
    emit(
        streams,
        json!({
            "command": "validate",
            "successful": is_successful(&game, &plan),
            "system": system,
            "domain_satisfied": extract_tokens(&plan).ok().map(|_| satisfies_rules(&game.domain_problem(), &plan)),
        }),
    );
    Ok(EXIT_OK)
}

fn accepts(spec: &Path, plan: &Path, budget: &Budget, streams: &mut Streams) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let plan = load_plan(plan, &game, streams)?;
    let mut arena = Arena::new(&game, budget.policy.into()).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let word = normalize_gaps(&lift_goals(&plan, &game), arena.d()).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let accepted = accepts_game(&mut arena, &word).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    emit(streams, json!({ "command": "accepts", "successful": accepted }));
    Ok(EXIT_OK)
}

fn synth(spec: &Path, output: Option<&Path>, budget: &Budget, streams: &mut Streams) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let start = Instant::now();
    let s = solve(&game, budget)?;
    let wins = s.charlie_wins();
    if let (Some(path), true) = (output, wins) {
        write_file(path, &io::write_strategy(&s))?;
    }
    emit(
        streams,
        json!({
            "command": "synth",
            "verdict": if wins { "charlie-wins" } else { "eve-wins" },
            "arena_states": s.graph.len(),
            "winning_states": s.attractor.region_size(),
            "initial_level": s.initial_level(),
            "strategy_states": s.strategy.moves.len(),
            "seconds": (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
        }),
    );
    Ok(if wins { EXIT_OK } else { EXIT_EVE_WINS })
}

/// Eve at the terminal: numbered options, `?` reprints the partial plan.
struct Interactive<'s, 'a> {
    streams: &'s mut Streams<'a>,
    plan: EventSequence,
}

impl EvePolicy for Interactive<'_, '_> {
    fn observe(&mut self, plan: &EventSequence) {
        self.plan = plan.clone();
    }

    fn choose(&mut self, round: usize, charlie: &CharlieMove, options: &[EveMove]) -> Result<EveMove, String> {
        let out = &mut *self.streams.stderr;
        let _ = writeln!(out, "round {round}: Charlie plays {charlie}");
        for (i, m) in options.iter().enumerate() {
            let _ = writeln!(out, "  {}) {m}", i + 1);
        }
        loop {
            let _ = write!(self.streams.stderr, "eve> ");
            let _ = self.streams.stderr.flush();
            let mut line = String::new();
            match self.streams.stdin.read_line(&mut line) {
                Ok(0) => return Err("end of input".into()),
                Err(e) => return Err(e.to_string()),
                Ok(_) => {}
            }
            let line = line.trim();
            if line == "?" {
                let _ = writeln!(self.streams.stderr, "plan: {}", self.plan);
                continue;
            }
            match line.parse::<usize>() {
                Ok(k) if (1..=options.len()).contains(&k) => return Ok(options[k - 1].clone()),
                _ => {
                    let _ = writeln!(self.streams.stderr, "enter 1..{} or ?", options.len());
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_simulation(
    spec: &Path,
    strategy: &Path,
    script: Option<&Path>,
    seed: Option<u64>,
    interactive: bool,
    horizon: usize,
    output: Option<&Path>,
    budget: &Budget,
    streams: &mut Streams,
) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let mut s = solve(&game, budget)?;
    let text = read(strategy, streams)?;
    s.strategy = io::read_strategy(&s, &text).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", strategy.display())))?;
    let result = if let Some(path) = script {
        let moves = io::read_script(&read(path, streams)?).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
        simulate(&s, &mut Scripted(moves.into()), horizon)
    } else if interactive {
        let mut eve = Interactive { streams, plan: EventSequence::default() };
        simulate(&s, &mut eve, horizon)
    } else {
        simulate(&s, &mut Seeded::new(seed.unwrap_or(0)), horizon)
    };
    let t = result.map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    if let Some(path) = output {
        write_file(path, &io::write_transcript(s.arena.game(), &t))?;
    }
    let mut line = serde_json::to_value(&t.verdict).expect("serializable");
    line["command"] = json!("simulate");
    line["rounds"] = json!(t.rounds.len());
    line["plan"] = json!(t.plan.to_string());
    emit(streams, line);
    Ok(EXIT_OK)
}

fn export(spec: &Path, what: What, format: Format, output: Option<&Path>, budget: &Budget, streams: &mut Streams) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let text = match (what, format) {
        (What::Automaton, Format::Dot) => io::automaton_dot(&game, budget.policy.into(), budget.max_states as usize)
            .map_err(|e| match e {
                io::ExportError::Budget(_) => fail(EXIT_BUDGET, e.to_string()),
                io::ExportError::Build(_) => fail(EXIT_USAGE, e.to_string()),
            })?,
        (What::Arena, Format::Dot) => io::arena_dot(&solve(&game, budget)?),
        (What::Arena, Format::Json) => io::write_arena(&solve(&game, budget)?),
        (what, format) => return Err(fail(EXIT_USAGE, format!("cannot export {what:?} as {format:?}"))),
    };
    match output {
        Some(path) => {
            write_file(path, &text)?;
            emit(streams, json!({ "command": "export", "written": path.display().to_string(), "bytes": text.len() }));
        }
        None => {
            let _ = streams.stdout.write_all(text.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

fn stats(spec: &Path, format: Format, budget: &Budget, streams: &mut Streams) -> Result<i32, Failure> {
    let game = load_game(spec, streams)?;
    let policy = Policy::from(budget.policy);
    let automata = game_automaton(&game, policy).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let (d, tv) = (automata.d, automata.tv().clone());
    let full = automata.game.clone();
    let mut explorer = Explorer::new(automata.automaton);
    let automaton = explore(&mut explorer, |q| feasible_symbols(&tv, &q.0, d), budget.max_states as usize);
    if automaton.truncated {
        return Err(fail(EXIT_BUDGET, format!("automaton exceeds {} states", budget.max_states)));
    }
    let start = Instant::now();
    let s = solve(&game, budget)?;
    let edges: usize = s.graph.edges.iter().map(Vec::len).sum();
    let report = json!({
        "command": "stats",
        "d": d,
        "window_system": window(&full.system_problem()),
        "window_domain": window(&full.domain_problem()),
        "actions": tlsynth::automaton::Universe::new(&full.variables().cloned().collect::<Vec<_>>())
            .map(|u| u.action_count())
            .unwrap_or(0),
        "automaton_states": automaton.states,
        "automaton_edges": automaton.edges,
        "automaton_accepting": automaton.accepting,
        "arena_states": s.graph.len(),
        "arena_edges": edges,
        "final_states": s.graph.finals.iter().filter(|&&f| f).count(),
        "winning_states": s.attractor.region_size(),
        "stationary_index": s.attractor.stationary_index(),
        "charlie_wins": s.charlie_wins(),
        "solve_seconds": (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
    });
    match format {
        Format::Text => {
            for (k, v) in report.as_object().expect("object") {
                if k != "command" {
                    let _ = writeln!(streams.stdout, "{k:<20} {v}");
                }
            }
        }
        _ => emit(streams, report),
    }
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli, streams: &mut Streams) -> Result<i32, Failure> {
    match cli.command {
        Command::Check { spec } => check(&spec, streams),
        Command::Validate { spec, plan } => validate(&spec, &plan, streams),
        Command::Accepts { spec, plan, budget } => accepts(&spec, &plan, &budget, streams),
        Command::Synth { spec, output, budget } => synth(&spec, output.as_deref(), &budget, streams),
        Command::Simulate { spec, strategy, script, seed, interactive, horizon, output, budget } => run_simulation(
            &spec,
            &strategy,
            script.as_deref(),
            seed,
            interactive,
            horizon,
            output.as_deref(),
            &budget,
            streams,
        ),
        Command::Export { spec, what, format, output, budget } => {
            export(&spec, what, format, output.as_deref(), &budget, streams)
        }
        Command::Stats { spec, format, budget } => stats(&spec, format, &budget, streams),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run_cli<I, T>(args: I, streams: &mut Streams) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(if e.use_stderr() { &mut *streams.stderr } else { &mut *streams.stdout }, "{e}");
            return code;
        }
    };
    match dispatch(cli, streams) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(streams.stderr, "error: {}", f.message);
            f.code
        }
    }
}
