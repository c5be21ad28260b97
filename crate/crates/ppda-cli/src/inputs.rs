//! Reading files and command-line values into library types.

use std::path::Path;

use ppda::model::{parse_configuration, parse_ppda, validate, Configuration, Ppda};
use ppda::omega::{parse_muller, parse_observer, MullerAutomaton, ObservingAutomaton};
use ppda::regsets::{parse_definitions, parse_set_expr, reduce_to_simple, ConfigSet, Definitions, SimpleSet};
use ppda::solver::Relation;
use ppda::{format_rational, parse_rational, Rational};

use crate::error::CliError;

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input {
        source_name: Some(path.to_path_buf()),
        line_col: None,
        message: e.to_string(),
    })
}

/// Parses a model file and rejects heads whose probabilities do not sum to 0 or 1.
pub fn load_model(path: &Path) -> Result<Ppda, CliError> {
    let ppda = parse_ppda(&read(path)?).map_err(|e| CliError::parse(Some(path), "model", e))?;
    let report = validate(&ppda);
    if let Some((h, sum)) = report.violations.first() {
        return Err(CliError::Input {
            source_name: Some(path.to_path_buf()),
            line_col: None,
            message: format!(
                "probabilities of head {} sum to {}",
                ppda.display_head(*h),
                format_rational(sum)
            ),
        });
    }
    Ok(ppda)
}

pub fn load_definitions(ppda: &Ppda, path: Option<&Path>) -> Result<Definitions, CliError> {
    match path {
        None => Ok(Definitions::default()),
        Some(p) => parse_definitions(ppda, &read(p)?).map_err(|e| CliError::parse(Some(p), "definitions", e)),
    }
}

pub fn load_observer(ppda: &Ppda, path: &Path) -> Result<ObservingAutomaton, CliError> {
    parse_observer(ppda, &read(path)?).map_err(|e| CliError::parse(Some(path), "observer", e))
}

pub fn load_muller(ppda: &Ppda, path: &Path) -> Result<MullerAutomaton, CliError> {
    parse_muller(ppda, &read(path)?).map_err(|e| CliError::parse(Some(path), "Muller automaton", e))
}

pub fn config(ppda: &Ppda, text: &str) -> Result<Configuration, CliError> {
    parse_configuration(ppda, text).map_err(|e| CliError::parse(None, "configuration", e))
}

pub fn set(ppda: &Ppda, text: &str, defs: &Definitions) -> Result<ConfigSet, CliError> {
    parse_set_expr(ppda, text, defs).map_err(|e| CliError::parse(None, "set expression", e))
}

/// `value_parser` for exact rationals on the command line.
pub fn rational_arg(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| e.message)
}

/// A threshold such as `>= 1/4`.
#[derive(Clone, Debug)]
pub struct Threshold {
    pub rel: Relation,
    pub bound: Rational,
}

pub fn threshold_arg(text: &str) -> Result<Threshold, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !matches!(c, '<' | '>' | '='))
        .ok_or_else(|| format!("`{text}` lacks a bound"))?;
    let (rel, bound) = text.split_at(split);
    Ok(Threshold {
        rel: rel.parse()?,
        bound: rational_arg(bound.trim())?,
    })
}

/// Until sets and a start configuration, made simple by the regular-set
/// product when either set depends on more than the head.
pub struct SimpleUntil {
    pub ppda: Ppda,
    pub c1: SimpleSet,
    pub c2: SimpleSet,
    pub start: Configuration,
    pub reduced: bool,
}

pub fn simple_until(ppda: &Ppda, c1: &ConfigSet, c2: &ConfigSet, start: Configuration) -> Result<SimpleUntil, CliError> {
    if let (Some(s1), Some(s2)) = (c1.as_simple(), c2.as_simple()) {
        return Ok(SimpleUntil {
            ppda: ppda.clone(),
            c1: s1,
            c2: s2,
            start,
            reduced: false,
        });
    }
    let reduction = reduce_to_simple(ppda, &[c1.to_automaton(ppda), c2.to_automaton(ppda)])?;
    Ok(SimpleUntil {
        start: reduction.embed(&start),
        c1: reduction.simple_images[0].clone(),
        c2: reduction.simple_images[1].clone(),
        ppda: reduction.product,
        reduced: true,
    })
}
