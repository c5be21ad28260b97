use std::path::{Path, PathBuf};

use ppda::mc::Analysis;
use ppda::omega::OmegaError;
use ppda::pbpa::ApproxError;
use ppda::pctl::PctlError;
use ppda::regsets::RegError;
use ppda::solver::SolverError;
use ppda::ParseError;
use serde_json::{json, Value};
use thiserror::Error;

/// Failure of a job. Input errors exit with 1, internal ones with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", render_input(.source_name, .line_col, .message))]
    Input {
        source_name: Option<PathBuf>,
        line_col: Option<(usize, usize)>,
        message: String,
    },
    #[error("{0}")]
    Internal(String),
}

fn render_input(source: &Option<PathBuf>, at: &Option<(usize, usize)>, message: &str) -> String {
    match (source, at) {
        (Some(p), Some((l, c))) => format!("{}:{l}:{c}: {message}", p.display()),
        (Some(p), None) => format!("{}: {message}", p.display()),
        (None, Some((l, c))) => format!("{l}:{c}: {message}"),
        (None, None) => message.to_string(),
    }
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input {
            source_name: None,
            line_col: None,
            message: message.into(),
        }
    }

    /// A parse error inside `path`, or inside a command-line argument when
    /// `path` is `None`.
    pub fn parse(path: Option<&Path>, what: &str, e: ParseError) -> Self {
        let message = match path {
            Some(_) => e.message,
            None => format!("{what}: {}", e.message),
        };
        CliError::Input {
            source_name: path.map(Path::to_path_buf),
            line_col: Some((e.pos.line, e.pos.col)),
            message,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Input {
                source_name,
                line_col,
                message,
            } => json!({
                "kind": "input",
                "message": message,
                "file": source_name.as_ref().map(|p| p.display().to_string()),
                "line": line_col.map(|(l, _)| l),
                "col": line_col.map(|(_, c)| c),
            }),
            CliError::Internal(message) => json!({ "kind": "internal", "message": message }),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidInput(m) => CliError::input(m),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<RegError> for CliError {
    fn from(e: RegError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<PctlError> for CliError {
    fn from(e: PctlError) -> Self {
        match e {
            PctlError::NonQualitative(_) | PctlError::UnknownAtom(_) | PctlError::Regular(_) => {
                CliError::input(e.to_string())
            }
            PctlError::Solver(s) => s.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<ApproxError> for CliError {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::NotStateless | ApproxError::BadTolerance => CliError::input(e.to_string()),
            ApproxError::Pctl(p) => p.into(),
            ApproxError::Solver(s) => s.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<OmegaError> for CliError {
    fn from(e: OmegaError) -> Self {
        match e {
            OmegaError::Equations(_) | OmegaError::IrunUndecided(_) => CliError::Internal(e.to_string()),
            OmegaError::Solver(s) => s.into(),
            other => CliError::input(other.to_string()),
        }
    }
}

/// Outcome of an analysis that may be undecidable with the chosen backend.
pub enum Decided<T> {
    Known(T),
    Unknown(String),
}

pub fn undecided_analysis(r: Result<Analysis, OmegaError>) -> Result<Decided<Analysis>, CliError> {
    match r {
        Ok(a) => Ok(Decided::Known(a)),
        Err(OmegaError::IrunUndecided(m)) => Ok(Decided::Unknown(format!("cannot decide whether {m} avoids termination"))),
        Err(e) => Err(e.into()),
    }
}
