use std::collections::HashSet;

use super::{Configuration, Head, ModelError, Ppda, Prob, Rule, StateId, SymbolId};
use crate::text::{Cursor, ParseError, Pos, Tok};

/// Parses a system description.
///
/// ```text
/// ppda
/// states p q;
/// alphabet X Y;
/// p X -> 1/2 q Y X;   # push
/// p X -> 1/2 q eps;   # pop
/// ```
///
/// A `pbpa` header drops the `states` line and the state names from rules.
pub fn parse_ppda(text: &str) -> Result<Ppda, ParseError> {
    let mut cur = Cursor::new(text)?;
    let stateless = if cur.eat_keyword("pbpa") {
        true
    } else if cur.eat_keyword("ppda") {
        false
    } else {
        return Err(cur.error("expected header `ppda` or `pbpa`"));
    };

    let mut states: Vec<String> = Vec::new();
    let mut symbols: Vec<String> = Vec::new();
    if stateless {
        states.push("p".to_string());
    }
    let mut rules = Vec::new();
    let mut seen = HashSet::new();

    while !cur.is_done() {
        if matches!(cur.peek(), Some(Tok::Ident(s)) if s == "states") {
            let pos = cur.pos();
            cur.bump();
            if stateless {
                return Err(ParseError::new(pos, "a pbpa has no `states` declaration"));
            }
            declare(&mut cur, &mut states)?;
            continue;
        }
        if cur.eat_keyword("alphabet") {
            declare(&mut cur, &mut symbols)?;
            continue;
        }
        let rule_pos = cur.pos();
        let lhs_state = if stateless {
            StateId(0)
        } else {
            lookup_state(&mut cur, &states)?
        };
        let lhs_symbol = lookup_symbol(&mut cur, &symbols)?;
        cur.expect(&Tok::Arrow)?;
        let (value, prob_pos) = cur.rational()?;
        let prob = Prob::new(value).map_err(|e| ParseError::new(prob_pos, e.to_string()))?;
        let rhs_state = if stateless {
            StateId(0)
        } else {
            lookup_state(&mut cur, &states)?
        };
        let mut rhs_stack = Vec::new();
        while !matches!(cur.peek(), Some(Tok::Semi) | None) {
            if cur.eat_keyword("eps") || cur.eat_keyword("ε") {
                continue;
            }
            rhs_stack.push(lookup_symbol(&mut cur, &symbols)?);
        }
        cur.expect(&Tok::Semi)?;
        let key = (lhs_state, lhs_symbol, rhs_state, rhs_stack.clone());
        if !seen.insert(key) {
            return Err(ParseError::new(rule_pos, "duplicate rule for the same left- and right-hand side"));
        }
        rules.push(Rule {
            lhs: Head::new(lhs_state, lhs_symbol),
            rhs_state,
            rhs_stack,
            prob,
        });
    }
    if symbols.is_empty() {
        return Err(cur.error("missing `alphabet` declaration"));
    }
    if states.is_empty() {
        return Err(cur.error("missing `states` declaration"));
    }
    let built = Ppda::new(states, symbols, rules).map_err(|e| match e {
        ModelError::DuplicateName(n) => ParseError::new(Pos::default(), format!("duplicate name `{n}`")),
        other => ParseError::new(Pos::default(), other.to_string()),
    })?;
    Ok(built.with_stateless_syntax(stateless))
}

fn declare(cur: &mut Cursor, into: &mut Vec<String>) -> Result<(), ParseError> {
    loop {
        if cur.eat(&Tok::Semi) {
            return Ok(());
        }
        let (name, pos) = cur.ident()?;
        if ["eps", "ε", "states", "alphabet"].contains(&name.as_str()) {
            return Err(ParseError::new(pos, format!("`{name}` is reserved")));
        }
        if into.contains(&name) {
            return Err(ParseError::new(pos, format!("`{name}` declared twice")));
        }
        into.push(name);
        cur.eat(&Tok::Comma);
    }
}

fn lookup_state(cur: &mut Cursor, states: &[String]) -> Result<StateId, ParseError> {
    let (name, pos) = cur.ident()?;
    states
        .iter()
        .position(|s| *s == name)
        .map(|i| StateId(i as u32))
        .ok_or_else(|| ParseError::new(pos, format!("unknown control state `{name}`")))
}

fn lookup_symbol(cur: &mut Cursor, symbols: &[String]) -> Result<SymbolId, ParseError> {
    let (name, pos) = cur.ident()?;
    symbols
        .iter()
        .position(|s| *s == name)
        .map(|i| SymbolId(i as u32))
        .ok_or_else(|| ParseError::new(pos, format!("unknown stack symbol `{name}`")))
}

/// Parses `[state:]word`, where the word is `eps`, whitespace-separated
/// symbol names, or a run of names matched greedily against the alphabet.
pub fn parse_configuration(ppda: &Ppda, text: &str) -> Result<Configuration, ParseError> {
    let text = text.trim();
    let (state, word) = match text.split_once(':') {
        Some((s, w)) => {
            let s = s.trim();
            let q = ppda
                .state_id(s)
                .ok_or_else(|| ParseError::new(Pos { line: 1, col: 1 }, format!("unknown control state `{s}`")))?;
            (q, w.trim())
        }
        None if ppda.num_states() == 1 => (StateId(0), text),
        None => {
            return Err(ParseError::new(
                Pos { line: 1, col: 1 },
                "configuration needs a `state:` prefix",
            ))
        }
    };
    let offset = text.len() - word.len() + 1;
    let stack = parse_word(ppda, word, offset)?;
    Ok(Configuration::new(state, stack))
}

pub(crate) fn parse_word(ppda: &Ppda, word: &str, offset: usize) -> Result<Vec<SymbolId>, ParseError> {
    let word = word.trim();
    if word.is_empty() || word == "eps" || word == "ε" {
        return Ok(Vec::new());
    }
    let err = |col: usize, msg: String| ParseError::new(Pos { line: 1, col: offset + col }, msg);
    if word.contains(char::is_whitespace) {
        return word
            .split_whitespace()
            .map(|name| {
                ppda.symbol_id(name)
                    .ok_or_else(|| err(0, format!("unknown stack symbol `{name}`")))
            })
            .collect();
    }
    let mut out = Vec::new();
    let mut rest = word;
    while !rest.is_empty() {
        let best = ppda
            .symbols()
            .filter(|&x| rest.starts_with(ppda.symbol_name(x)))
            .max_by_key(|&x| ppda.symbol_name(x).len());
        match best {
            Some(x) => {
                out.push(x);
                rest = &rest[ppda.symbol_name(x).len()..];
            }
            None => {
                let col = word.len() - rest.len();
                return Err(err(col, format!("cannot split `{rest}` into stack symbols")));
            }
        }
    }
    Ok(out)
}

/// Parses `state.X`, or `X` for a single-state system.
pub fn parse_head(ppda: &Ppda, text: &str) -> Result<Head, ParseError> {
    let text = text.trim();
    let at = Pos { line: 1, col: 1 };
    let (state, symbol) = match text.split_once('.') {
        Some((s, x)) => (
            ppda.state_id(s.trim())
                .ok_or_else(|| ParseError::new(at, format!("unknown control state `{s}`")))?,
            x.trim(),
        ),
        None if ppda.num_states() == 1 => (StateId(0), text),
        None => return Err(ParseError::new(at, "head needs the form `state.symbol`")),
    };
    let symbol = ppda
        .symbol_id(symbol)
        .ok_or_else(|| ParseError::new(at, format!("unknown stack symbol `{symbol}`")))?;
    Ok(Head::new(state, symbol))
}
