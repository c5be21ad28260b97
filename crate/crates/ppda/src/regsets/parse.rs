use std::collections::{BTreeMap, BTreeSet};

use super::{ConfigSet, DeltaAutomaton, SimpleSet};
use crate::model::{Head, Ppda, StateId, SymbolId};
use crate::text::{Cursor, ParseError, Tok};

/// Named configuration sets, in definition order.
#[derive(Clone, Debug, Default)]
pub struct Definitions {
    pub sets: BTreeMap<String, ConfigSet>,
    pub order: Vec<String>,
}

impl Definitions {
    pub fn get(&self, name: &str) -> Option<&ConfigSet> {
        self.sets.get(name)
    }

    fn insert(&mut self, name: String, set: ConfigSet) {
        if self.sets.insert(name.clone(), set).is_none() {
            self.order.push(name);
        }
    }
}

/// Parses automaton blocks and named set expressions.
///
/// ```text
/// automaton evenZ
///   states p odd even sink;    # control states are implicit start states
///   accepting even;
///   trans p Z -> odd;
///   trans odd * -> even;       # `*`: every symbol not listed for this state
///   trans even * -> odd;
///   trans p I D -> sink;
///   trans sink * -> sink;
///
/// set target = atZ + eps;
/// ```
pub fn parse_definitions(ppda: &Ppda, text: &str) -> Result<Definitions, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut defs = Definitions::default();
    while !cur.is_done() {
        let pos = cur.pos();
        if cur.eat_keyword("automaton") {
            let (name, name_pos) = cur.ident()?;
            if defs.sets.contains_key(&name) {
                return Err(ParseError::new(name_pos, format!("`{name}` defined twice")));
            }
            let aut = automaton_body(&mut cur, ppda)?;
            defs.insert(name, ConfigSet::Regular(aut));
        } else if cur.eat_keyword("set") || cur.eat_keyword("atom") {
            let (name, name_pos) = cur.ident()?;
            if defs.sets.contains_key(&name) {
                return Err(ParseError::new(name_pos, format!("`{name}` defined twice")));
            }
            cur.expect(&Tok::Eq)?;
            let set = set_expr(&mut cur, ppda, &defs)?;
            cur.expect(&Tok::Semi)?;
            defs.insert(name, set);
        } else {
            return Err(ParseError::new(pos, "expected `automaton` or `set`"));
        }
    }
    Ok(defs)
}

fn automaton_body(cur: &mut Cursor, ppda: &Ppda) -> Result<DeltaAutomaton, ParseError> {
    let ng = ppda.num_symbols();
    let mut names: Vec<String> = ppda.state_names().to_vec();
    let mut accepting = BTreeSet::new();
    // (state, symbol) -> target, and per-state default target
    let mut explicit: BTreeMap<(usize, usize), (usize, crate::text::Pos)> = BTreeMap::new();
    let mut default: BTreeMap<usize, usize> = BTreeMap::new();
    let start = cur.pos();
    let state_of = |names: &mut Vec<String>, name: &str| match names.iter().position(|n| n == name) {
        Some(i) => i,
        None => {
            names.push(name.to_string());
            names.len() - 1
        }
    };
    let mut declared: BTreeSet<String> = names.iter().cloned().collect();
    loop {
        if cur.eat_keyword("states") {
            while !cur.eat(&Tok::Semi) {
                let (n, _) = cur.ident()?;
                state_of(&mut names, &n);
                declared.insert(n);
                cur.eat(&Tok::Comma);
            }
        } else if cur.eat_keyword("accepting") {
            while !cur.eat(&Tok::Semi) {
                let (n, p) = cur.ident()?;
                if !declared.contains(&n) {
                    return Err(ParseError::new(p, format!("undeclared automaton state `{n}`")));
                }
                accepting.insert(state_of(&mut names, &n));
                cur.eat(&Tok::Comma);
            }
        } else if cur.eat_keyword("trans") {
            let (from, from_pos) = cur.ident()?;
            if !declared.contains(&from) {
                return Err(ParseError::new(from_pos, format!("undeclared automaton state `{from}`")));
            }
            let from = state_of(&mut names, &from);
            let mut syms = Vec::new();
            let mut wildcard = false;
            while !matches!(cur.peek(), Some(Tok::Arrow) | None) {
                if cur.eat(&Tok::Star) {
                    wildcard = true;
                    continue;
                }
                let (x, p) = cur.ident()?;
                let id = ppda
                    .symbol_id(&x)
                    .ok_or_else(|| ParseError::new(p, format!("unknown stack symbol `{x}`")))?;
                syms.push((id.index(), p));
            }
            cur.expect(&Tok::Arrow)?;
            let (to, to_pos) = cur.ident()?;
            if !declared.contains(&to) {
                return Err(ParseError::new(to_pos, format!("undeclared automaton state `{to}`")));
            }
            let to = state_of(&mut names, &to);
            cur.expect(&Tok::Semi)?;
            if wildcard && default.insert(from, to).is_some() {
                return Err(ParseError::new(from_pos, "two `*` transitions for one state"));
            }
            for (x, p) in syms {
                if explicit.insert((from, x), (to, p)).is_some() {
                    return Err(ParseError::new(p, "transition given twice"));
                }
            }
        } else {
            break;
        }
    }
    let mut trans = vec![vec![0; ng]; names.len()];
    for (s, row) in trans.iter_mut().enumerate() {
        for (x, slot) in row.iter_mut().enumerate() {
            *slot = match (explicit.get(&(s, x)), default.get(&s)) {
                (Some(&(t, _)), _) => t,
                (None, Some(&t)) => t,
                (None, None) => {
                    return Err(ParseError::new(
                        start,
                        format!(
                            "missing transition from `{}` on `{}`",
                            names[s],
                            ppda.symbol_name(SymbolId(x as u32))
                        ),
                    ))
                }
            };
        }
    }
    let acc = (0..names.len()).map(|s| accepting.contains(&s)).collect();
    DeltaAutomaton::new(ppda.num_states(), ng, trans, acc).map_err(|e| ParseError::new(start, e.to_string()))
}

/// Parses a set expression such as `all`, `empty`, `eps`, `dead`, `atZ`,
/// `at(Z)`, `{p.X, q.eps}`, or the name of a defined set, joined with `+`
/// (union) and `&` (intersection) and negated with `!`.
pub fn parse_set_expr(ppda: &Ppda, text: &str, defs: &Definitions) -> Result<ConfigSet, ParseError> {
    let mut cur = Cursor::new(text)?;
    let set = set_expr(&mut cur, ppda, defs)?;
    cur.expect_end()?;
    Ok(set)
}

fn set_expr(cur: &mut Cursor, ppda: &Ppda, defs: &Definitions) -> Result<ConfigSet, ParseError> {
    let mut acc = set_conj(cur, ppda, defs)?;
    while cur.eat(&Tok::Plus) || cur.eat(&Tok::Pipe) {
        let rhs = set_conj(cur, ppda, defs)?;
        acc = combine(ppda, acc, rhs, true);
    }
    Ok(acc)
}

fn set_conj(cur: &mut Cursor, ppda: &Ppda, defs: &Definitions) -> Result<ConfigSet, ParseError> {
    let mut acc = set_atom(cur, ppda, defs)?;
    while cur.eat(&Tok::Amp) {
        let rhs = set_atom(cur, ppda, defs)?;
        acc = combine(ppda, acc, rhs, false);
    }
    Ok(acc)
}

fn combine(ppda: &Ppda, a: ConfigSet, b: ConfigSet, union: bool) -> ConfigSet {
    match (a, b) {
        (ConfigSet::Simple(x), ConfigSet::Simple(y)) => {
            ConfigSet::Simple(if union { x.union(&y) } else { x.intersection(&y) })
        }
        (a, b) => {
            let (a, b) = (a.to_automaton(ppda), b.to_automaton(ppda));
            let out = if union { a.union(&b) } else { a.intersect(&b) };
            ConfigSet::Regular(out.expect("both automata are over the system's states and symbols"))
        }
    }
}

fn set_atom(cur: &mut Cursor, ppda: &Ppda, defs: &Definitions) -> Result<ConfigSet, ParseError> {
    let pos = cur.pos();
    if cur.eat(&Tok::Bang) {
        return Ok(match set_atom(cur, ppda, defs)? {
            ConfigSet::Simple(s) => ConfigSet::Simple(s.complement(ppda)),
            ConfigSet::Regular(a) => ConfigSet::Regular(a.complement()),
        });
    }
    if cur.eat(&Tok::LParen) {
        let s = set_expr(cur, ppda, defs)?;
        cur.expect(&Tok::RParen)?;
        return Ok(s);
    }
    if cur.eat(&Tok::LBrace) {
        let mut heads = BTreeSet::new();
        let mut eps = BTreeSet::new();
        while !cur.eat(&Tok::RBrace) {
            let (first, p) = cur.ident()?;
            let (state, symbol) = if cur.eat(&Tok::Dot) {
                let q = ppda
                    .state_id(&first)
                    .ok_or_else(|| ParseError::new(p, format!("unknown control state `{first}`")))?;
                let (x, xp) = cur.ident()?;
                (vec![q], (x, xp))
            } else if ppda.num_states() == 1 {
                (vec![StateId(0)], (first, p))
            } else {
                (ppda.states().collect(), (first, p))
            };
            let (x, xp) = symbol;
            if x == "eps" || x == "ε" {
                eps.extend(state);
            } else {
                let id = ppda
                    .symbol_id(&x)
                    .ok_or_else(|| ParseError::new(xp, format!("unknown stack symbol `{x}`")))?;
                heads.extend(state.into_iter().map(|q| Head::new(q, id)));
            }
            cur.eat(&Tok::Comma);
        }
        return Ok(ConfigSet::Simple(SimpleSet::new(heads, eps)));
    }
    let (name, p) = cur.ident()?;
    if let Some(set) = defs.get(&name) {
        return Ok(set.clone());
    }
    let topped = |x: &str, at| {
        ppda.symbol_id(x)
            .map(|id| SimpleSet::topped_by(ppda, id))
            .ok_or_else(|| ParseError::new(at, format!("unknown stack symbol `{x}`")))
    };
    let simple = match name.as_str() {
        "all" | "tt" => SimpleSet::all(ppda),
        "empty" | "none" => SimpleSet::empty(),
        "eps" | "ε" => SimpleSet::all_eps(ppda),
        "dead" => SimpleSet::dead(ppda),
        "at" => {
            cur.expect(&Tok::LParen)?;
            let (x, xp) = cur.ident()?;
            cur.expect(&Tok::RParen)?;
            topped(&x, xp)?
        }
        other => match other.strip_prefix("at") {
            Some(x) if ppda.symbol_id(x).is_some() => topped(x, p)?,
            _ => return Err(ParseError::new(pos, format!("unknown set `{name}`"))),
        },
    };
    Ok(ConfigSet::Simple(simple))
}
