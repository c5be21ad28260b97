//! Text format for observing and Muller automata.
//!
//! ```text
//! observer
//!   states a0 a1;
//!   init a0;                # defaults to the first state
//!   step a0 Z -> a1;        # heads are `X` for pBPA, `p.X` otherwise
//!   step a0 * -> a0;        # `*`: every head not listed for this state
//!   step a1 * -> a1;
//!   acceptance {a1};
//! ```
//!
//! A Muller automaton starts with `muller` and has the same body; its
//! acceptance lists the accepting sets of infinitely visited states.

use std::collections::{BTreeMap, BTreeSet};

use super::{Acceptance, MullerAutomaton, ObservingAutomaton};
use crate::model::{Head, Ppda, StateId};
use crate::text::{Cursor, ParseError, Pos, Tok};

struct Body {
    names: Vec<String>,
    step: Vec<usize>,
    init: usize,
    family: BTreeSet<BTreeSet<usize>>,
}

pub fn parse_observer(ppda: &Ppda, text: &str) -> Result<ObservingAutomaton, ParseError> {
    let b = parse_body(ppda, text, "observer")?;
    ObservingAutomaton::new(
        b.names,
        ppda.num_states(),
        ppda.num_symbols(),
        b.step,
        b.init,
        Acceptance::Sets(b.family),
    )
    .map_err(|e| ParseError::new(Pos { line: 1, col: 1 }, e.to_string()))
}

pub fn parse_muller(ppda: &Ppda, text: &str) -> Result<MullerAutomaton, ParseError> {
    let b = parse_body(ppda, text, "muller")?;
    MullerAutomaton::new(b.names, ppda.num_states(), ppda.num_symbols(), b.step, b.init, b.family)
        .map_err(|e| ParseError::new(Pos { line: 1, col: 1 }, e.to_string()))
}

fn head(cur: &mut Cursor, ppda: &Ppda) -> Result<Head, ParseError> {
    let (first, pos) = cur.ident()?;
    if cur.eat(&Tok::Dot) {
        let state = ppda
            .state_id(&first)
            .ok_or_else(|| ParseError::new(pos, format!("unknown control state `{first}`")))?;
        let (x, xpos) = cur.ident()?;
        let symbol = ppda
            .symbol_id(&x)
            .ok_or_else(|| ParseError::new(xpos, format!("unknown stack symbol `{x}`")))?;
        return Ok(Head::new(state, symbol));
    }
    if ppda.num_states() != 1 {
        return Err(ParseError::new(pos, "head needs the form `state.symbol`"));
    }
    let symbol = ppda
        .symbol_id(&first)
        .ok_or_else(|| ParseError::new(pos, format!("unknown stack symbol `{first}`")))?;
    Ok(Head::new(StateId(0), symbol))
}

fn parse_body(ppda: &Ppda, text: &str, keyword: &str) -> Result<Body, ParseError> {
    let mut cur = Cursor::new(text)?;
    if !cur.eat_keyword(keyword) {
        return Err(cur.error(format!("expected `{keyword}`")));
    }
    let mut names: Vec<String> = Vec::new();
    let lookup = |names: &[String], name: &str, pos: Pos| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ParseError::new(pos, format!("undeclared automaton state `{name}`")))
    };
    let mut init = None;
    let mut explicit: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut default: BTreeMap<usize, usize> = BTreeMap::new();
    let mut family = BTreeSet::new();
    while !cur.is_done() {
        if cur.eat_keyword("states") {
            while !cur.eat(&Tok::Semi) {
                let (n, p) = cur.ident()?;
                if names.contains(&n) {
                    return Err(ParseError::new(p, format!("state `{n}` declared twice")));
                }
                names.push(n);
                cur.eat(&Tok::Comma);
            }
        } else if cur.eat_keyword("init") {
            let (n, p) = cur.ident()?;
            init = Some(lookup(&names, &n, p)?);
            cur.expect(&Tok::Semi)?;
        } else if cur.eat_keyword("step") {
            let (from, p) = cur.ident()?;
            let from = lookup(&names, &from, p)?;
            let mut heads = Vec::new();
            let mut wildcard = false;
            while !matches!(cur.peek(), Some(Tok::Arrow) | None) {
                if cur.eat(&Tok::Star) {
                    wildcard = true;
                } else {
                    let pos = cur.pos();
                    heads.push((ppda.head_index(head(&mut cur, ppda)?), pos));
                }
            }
            cur.expect(&Tok::Arrow)?;
            let (to, p) = cur.ident()?;
            let to = lookup(&names, &to, p)?;
            cur.expect(&Tok::Semi)?;
            if wildcard && default.insert(from, to).is_some() {
                return Err(ParseError::new(p, "two `*` steps for one state"));
            }
            for (h, pos) in heads {
                if explicit.insert((from, h), to).is_some() {
                    return Err(ParseError::new(pos, "step given twice"));
                }
            }
        } else if cur.eat_keyword("acceptance") {
            while !cur.eat(&Tok::Semi) {
                cur.expect(&Tok::LBrace)?;
                let mut set = BTreeSet::new();
                while !cur.eat(&Tok::RBrace) {
                    let (n, p) = cur.ident()?;
                    set.insert(lookup(&names, &n, p)?);
                    cur.eat(&Tok::Comma);
                }
                family.insert(set);
                cur.eat(&Tok::Comma);
            }
        } else {
            return Err(cur.error("expected `states`, `init`, `step` or `acceptance`"));
        }
    }
    if names.is_empty() {
        return Err(cur.error("automaton has no states"));
    }
    let nh = ppda.num_heads();
    let mut step = Vec::with_capacity(names.len() * nh);
    for a in 0..names.len() {
        for h in 0..nh {
            let to = explicit.get(&(a, h)).or_else(|| default.get(&a)).ok_or_else(|| {
                ParseError::new(
                    Pos { line: 1, col: 1 },
                    format!("no step from `{}` on {}", names[a], ppda.display_head(ppda.head_at(h))),
                )
            })?;
            step.push(*to);
        }
    }
    Ok(Body {
        names,
        step,
        init: init.unwrap_or(0),
        family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bernoulli, z_muller, z_observer};
    use crate::rat;

    #[test]
    fn observer_round_trip() {
        let walk = bernoulli(&rat(1, 2));
        let text = "observer
            states a0 a1;
            step a0 Z -> a1;
            step a0 * -> a0;
            step a1 * -> a1;
            acceptance {a1};";
        assert_eq!(parse_observer(&walk, text).unwrap(), z_observer(&walk));
    }

    #[test]
    fn muller_round_trip() {
        let walk = bernoulli(&rat(1, 2));
        let text = "muller
            states other z;
            step other Z -> z;
            step z Z -> z;
            step other * -> other;
            step z * -> other;
            acceptance {z} {other z};";
        assert_eq!(parse_muller(&walk, text).unwrap(), z_muller(&walk));
    }

    #[test]
    fn missing_steps_are_reported() {
        let walk = bernoulli(&rat(1, 2));
        let err = parse_observer(&walk, "observer states a; step a Z -> a; acceptance {a};").unwrap_err();
        assert!(err.to_string().contains("no step from `a`"), "{err}");
        let err = parse_observer(&walk, "observer states a; step a * -> b;").unwrap_err();
        assert!(err.to_string().contains("undeclared"), "{err}");
    }
}
