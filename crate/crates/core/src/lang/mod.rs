//! The `.tg` specification language.
//!
//! ```text
//! controlled var x_s {
//!   values Earth, Slewing, Science, Comm;
//!   transitions Earth -> Slewing, Comm;
//!   duration Slewing [2, 5];
//!   uncontrollable Comm;
//! }
//! system rule comm: a[x_s=Comm] => exists b[x_g=Visible]. start(b) <= start(a) && end(a) <= end(b);
//! goal: exists a[x_s=Science];
//! ```
//!
//! The full grammar is in `docs/tg-format.md`.

mod desugar;
mod lexer;
mod parser;
mod printer;

use std::fmt;

use serde::Serialize;

pub use desugar::{desugar_goals, desugar_problem, lift_goals, GOAL_VALUE, GOAL_VARIABLE};
pub use lexer::Pos;
pub use printer::{print_game, print_rule};

use crate::model::Game;

#[derive(Clone, Debug)]
pub struct SpecSource {
    pub text: String,
    /// File path or `<stdin>`.
    pub origin: String,
}

impl SpecSource {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SpecSource { text: text.into(), origin: origin.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl Diagnostic {
    fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), line: pos.line, column: pos.col }
    }

    fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), line: pos.line, column: pos.col }
    }

    /// `origin:line:col: severity: message`
    pub fn render(&self, origin: &str) -> String {
        format!("{origin}:{}:{}: {}: {}", self.line, self.column, self.severity, self.message)
    }
}

#[derive(Clone, Debug)]
pub struct Parsed {
    pub game: Game,
    pub warnings: Vec<Diagnostic>,
}

/// Parses a game. On failure every diagnostic found is returned, errors
/// and warnings alike; at least one is an error.
pub fn parse_game(src: &SpecSource) -> Result<Parsed, Vec<Diagnostic>> {
    match parser::parse(&src.text) {
        (Some(game), warnings) => Ok(Parsed { game, warnings }),
        (None, diags) => Err(diags),
    }
}

/// Parses and renders diagnostics with the source's origin.
pub fn parse_game_str(text: &str) -> Result<Game, String> {
    parse_game(&SpecSource::new(text, "<input>")).map(|p| p.game).map_err(|diags| {
        diags.iter().map(|d| d.render("<input>")).collect::<Vec<_>>().join("\n")
    })
}

#[cfg(test)]
mod tests;
