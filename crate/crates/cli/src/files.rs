//! State and trace files.
//!
//! Both are TOML. A state file looks like
//!
//! ```toml
//! version = 1
//! n = 2
//! t_upd = 10.0
//! m = 5.0
//!
//! [[pipe]]
//! label = "ingest"
//! a = 0.6
//! b = 3.0
//!
//! [[pipe]]
//! a = 0.4
//! b = 1.0
//! ```
//!
//! A trace file is a flat table with `kind` set to `constant`,
//! `piecewise_constant`, `poisson_bucketed` or `on_off` plus the fields of
//! that kind, `duration`, `resolution` and an optional `seed` (at most
//! `i64::MAX`, the TOML integer range).

use std::fmt;

use fluidsched::simulator::TraceSpec;
use fluidsched::{PipeState, SystemState};
use serde::{Deserialize, Serialize};

pub const STATE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub n: usize,
    pub t_upd: f64,
    pub m: f64,
    #[serde(default)]
    pub pipe: Vec<PipeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub a: f64,
    pub b: f64,
}

fn default_version() -> u32 {
    STATE_FORMAT_VERSION
}

/// Syntax or schema error in an input file, with a 1-based position when
/// the parser reports one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(line), Some(col)) => write!(f, "line {line}, column {col}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ParseError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = position(text, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        ParseError {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

impl StateFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_toml(text)
    }

    pub fn from_state(state: &SystemState, labels: &[Option<String>]) -> Self {
        StateFile {
            version: STATE_FORMAT_VERSION,
            n: state.len(),
            t_upd: state.t_upd(),
            m: state.m(),
            pipe: state
                .pipes()
                .iter()
                .enumerate()
                .map(|(i, p)| PipeEntry {
                    label: labels.get(i).cloned().flatten(),
                    a: p.a,
                    b: p.b,
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("state files serialize")
    }

    /// Checks the declared pipe count and version, then builds the state.
    pub fn to_state(&self) -> fluidsched::Result<SystemState> {
        if self.version != STATE_FORMAT_VERSION {
            return Err(fluidsched::Error::Domain(format!(
                "unsupported state file version {} (expected {STATE_FORMAT_VERSION})",
                self.version
            )));
        }
        if self.n != self.pipe.len() {
            return Err(fluidsched::Error::Domain(format!(
                "n = {} but {} [[pipe]] sections",
                self.n,
                self.pipe.len()
            )));
        }
        let pipes = self.pipe.iter().map(|p| PipeState::new(p.a, p.b)).collect();
        SystemState::new(pipes, self.t_upd, self.m)
    }

    /// Label of pipe `i`, or its index.
    pub fn label(&self, i: usize) -> String {
        self.pipe
            .get(i)
            .and_then(|p| p.label.clone())
            .unwrap_or_else(|| i.to_string())
    }
}

pub fn parse_trace(text: &str) -> Result<TraceSpec, ParseError> {
    parse_toml(text)
}

/// Fails for seeds above `i64::MAX`, which TOML integers cannot hold.
pub fn trace_to_toml(spec: &TraceSpec) -> Result<String, String> {
    toml::to_string(spec).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATE: &str = "n = 2\nt_upd = 10.0\nm = 5.0\n\n[[pipe]]\nlabel = \"x\"\na = 0.6\nb = 3.0\n\n[[pipe]]\na = 0.4\nb = 1.0\n";

    #[test]
    fn parses_and_builds_state() {
        let f = StateFile::parse(STATE).unwrap();
        assert_eq!(f.version, 1);
        let s = f.to_state().unwrap();
        assert_eq!(s.pipes()[0], PipeState::new(0.6, 3.0));
        assert_eq!(f.label(0), "x");
        assert_eq!(f.label(1), "1");
    }

    #[test]
    fn round_trip() {
        let f = StateFile::parse(STATE).unwrap();
        assert_eq!(StateFile::parse(&f.to_toml()).unwrap(), f);
    }

    #[test]
    fn syntax_error_has_position() {
        let e = StateFile::parse("n = 2\nt_upd = = 10\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.column.is_some());
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let e = StateFile::parse("n = 0\nt_upd = 1.0\nm = 1.0\nbogus = 3\n").unwrap_err();
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn pipe_count_mismatch_is_rejected() {
        let f =
            StateFile::parse("n = 3\nt_upd = 1.0\nm = 1.0\n[[pipe]]\na = 0.1\nb = 0.0\n").unwrap();
        assert!(f.to_state().is_err());
    }

    #[test]
    fn trace_kinds_parse() {
        let t = parse_trace(
            "kind = \"constant\"\nrates = [0.5, 0.25]\nduration = 20.0\nresolution = 0.1\n",
        )
        .unwrap();
        assert_eq!(t.pipes(), 2);
        assert_eq!(t.seed, 0);
        let t = parse_trace(
            "kind = \"on_off\"\nhigh = [1.0]\nlow = [0.0]\non_time = 5.0\noff_time = 5.0\nduration = 20.0\nresolution = 1.0\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(parse_trace(&trace_to_toml(&t).unwrap()).unwrap(), t);
        let huge = TraceSpec {
            seed: u64::MAX,
            ..t
        };
        assert!(trace_to_toml(&huge).is_err());
        assert!(parse_trace("kind = \"sawtooth\"\nduration = 1.0\nresolution = 0.1\n").is_err());
    }
}
