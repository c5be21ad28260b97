use std::fmt;

use num_traits::{One, Zero};

use crate::solver::Relation;
use crate::text::{Cursor, ParseError, Tok};
use crate::text::format_rational;
use crate::Rational;

/// Probability bound `rel ρ` with `rel` one of `<`, `≤`, `≥`, `>` and `ρ ∈ [0,1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bound {
    rel: Relation,
    value: Rational,
}

impl Bound {
    pub fn new(rel: Relation, value: Rational) -> Option<Self> {
        let in_range = value >= Rational::zero() && value <= Rational::one();
        (rel != Relation::Eq && in_range).then_some(Bound { rel, value })
    }

    /// `= 1`, that is `≥ 1`.
    pub fn almost_surely() -> Self {
        Bound {
            rel: Relation::Ge,
            value: Rational::one(),
        }
    }

    /// `= 0`, that is `≤ 0`.
    pub fn never() -> Self {
        Bound {
            rel: Relation::Le,
            value: Rational::zero(),
        }
    }

    pub fn rel(&self) -> Relation {
        self.rel
    }

    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn holds(&self, p: &Rational) -> bool {
        self.rel.holds(p, &self.value)
    }

    /// The bound satisfied exactly when this one fails.
    pub fn negate(&self) -> Bound {
        Bound {
            rel: self.rel.negate().expect("bounds are never equalities"),
            value: self.value.clone(),
        }
    }

    /// `≤ 0`, `≥ 1` or one of their negations `> 0`, `< 1`.
    pub fn is_qualitative(&self) -> bool {
        let zero = self.value.is_zero();
        let one = self.value.is_one();
        match self.rel {
            Relation::Le | Relation::Gt => zero,
            Relation::Ge | Relation::Lt => one,
            Relation::Eq => false,
        }
    }

    /// Whether every probability satisfies the bound, or none does.
    pub fn trivial(&self) -> Option<bool> {
        let zero = self.value.is_zero();
        let one = self.value.is_one();
        match self.rel {
            Relation::Ge if zero => Some(true),
            Relation::Le if one => Some(true),
            Relation::Lt if zero => Some(false),
            Relation::Gt if one => Some(false),
            _ => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}{}]", self.rel, format_rational(&self.value))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Bound, Box<Formula>),
    Until(Bound, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(bound: Bound, f: Formula) -> Self {
        Formula::Next(bound, Box::new(f))
    }

    pub fn until(bound: Bound, a: Formula, b: Formula) -> Self {
        Formula::Until(bound, Box::new(a), Box::new(b))
    }

    /// Every probability bound is qualitative.
    pub fn is_qualitative(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_qualitative(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_qualitative() && b.is_qualitative(),
            Formula::Next(bound, f) => bound.is_qualitative() && f.is_qualitative(),
            Formula::Until(bound, a, b) => bound.is_qualitative() && a.is_qualitative() && b.is_qualitative(),
        }
    }

    pub fn is_negation_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(_) => false,
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.is_negation_free() && b.is_negation_free()
            }
            Formula::Next(_, f) => f.is_negation_free(),
        }
    }

    /// Atom names in order of first occurrence.
    pub fn atoms(&self) -> Vec<&str> {
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a str>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Atom(a) => {
                    if !out.contains(&a.as_str()) {
                        out.push(a);
                    }
                }
                Formula::Not(g) | Formula::Next(_, g) => walk(g, out),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Pushes negations to the atoms. Negated atoms are returned separately
    /// as `!name`, to be interpreted by the complement of `name`.
    pub(crate) fn push_negations(&self, negated: bool) -> Formula {
        match (self, negated) {
            (Formula::True, false) | (Formula::False, true) => Formula::True,
            (Formula::True, true) | (Formula::False, false) => Formula::False,
            (Formula::Atom(a), false) => Formula::Atom(a.clone()),
            (Formula::Atom(a), true) => Formula::Not(Box::new(Formula::Atom(a.clone()))),
            (Formula::Not(f), n) => f.push_negations(!n),
            (Formula::And(a, b), false) => Formula::and(a.push_negations(false), b.push_negations(false)),
            (Formula::And(a, b), true) => Formula::or(a.push_negations(true), b.push_negations(true)),
            (Formula::Or(a, b), false) => Formula::or(a.push_negations(false), b.push_negations(false)),
            (Formula::Or(a, b), true) => Formula::and(a.push_negations(true), b.push_negations(true)),
            (Formula::Next(bound, f), n) => {
                let bound = if n { bound.negate() } else { bound.clone() };
                Formula::next(bound, f.push_negations(false))
            }
            (Formula::Until(bound, a, b), n) => {
                let bound = if n { bound.negate() } else { bound.clone() };
                Formula::until(bound, a.push_negations(false), b.push_negations(false))
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("tt"),
            Formula::False => f.write_str("ff"),
            Formula::Atom(a) => f.write_str(a),
            Formula::Not(g) => write!(f, "!{g}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Next(bound, g) => write!(f, "X{bound} {g}"),
            Formula::Until(bound, a, b) => write!(f, "({a} U{bound} {b})"),
        }
    }
}

/// Parses `tt`, `ff`, atoms, `!`, `&`, `|`, `X[rel ρ] φ` and
/// `φ U[rel ρ] ψ`, where `rel` is `<`, `<=`, `>=`, `>` or the shorthand
/// `=0`/`=1`. An until must be parenthesized unless it is the whole formula.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut cur = Cursor::new(text)?;
    let f = until_level(&mut cur)?;
    cur.expect_end()?;
    Ok(f)
}

fn at_operator(cur: &Cursor, name: &str) -> bool {
    matches!(cur.peek(), Some(Tok::Ident(s)) if s == name) && cur.peek_at(1) == Some(&Tok::LBracket)
}

fn until_level(cur: &mut Cursor) -> Result<Formula, ParseError> {
    let left = or_level(cur)?;
    if at_operator(cur, "U") {
        cur.bump();
        let bound = bound(cur)?;
        let right = or_level(cur)?;
        return Ok(Formula::until(bound, left, right));
    }
    Ok(left)
}

fn or_level(cur: &mut Cursor) -> Result<Formula, ParseError> {
    let mut f = and_level(cur)?;
    while cur.eat(&Tok::Pipe) {
        f = Formula::or(f, and_level(cur)?);
    }
    Ok(f)
}

fn and_level(cur: &mut Cursor) -> Result<Formula, ParseError> {
    let mut f = unary(cur)?;
    while cur.eat(&Tok::Amp) {
        f = Formula::and(f, unary(cur)?);
    }
    Ok(f)
}

fn unary(cur: &mut Cursor) -> Result<Formula, ParseError> {
    if cur.eat(&Tok::Bang) {
        return Ok(Formula::not(unary(cur)?));
    }
    if at_operator(cur, "X") {
        cur.bump();
        let bound = bound(cur)?;
        return Ok(Formula::next(bound, unary(cur)?));
    }
    if cur.eat(&Tok::LParen) {
        let f = until_level(cur)?;
        cur.expect(&Tok::RParen)?;
        return Ok(f);
    }
    let (name, _) = cur.ident()?;
    Ok(match name.as_str() {
        "tt" | "true" => Formula::True,
        "ff" | "false" => Formula::False,
        _ => Formula::Atom(name),
    })
}

fn bound(cur: &mut Cursor) -> Result<Bound, ParseError> {
    cur.expect(&Tok::LBracket)?;
    let pos = cur.pos();
    let rel = match cur.bump() {
        Some((Tok::Lt, _)) => Relation::Lt,
        Some((Tok::Le, _)) => Relation::Le,
        Some((Tok::Ge, _)) => Relation::Ge,
        Some((Tok::Gt, _)) => Relation::Gt,
        Some((Tok::Eq, _)) => Relation::Eq,
        _ => return Err(ParseError::new(pos, "expected one of `<`, `<=`, `>=`, `>`, `=`")),
    };
    let (value, vpos) = cur.rational()?;
    cur.expect(&Tok::RBracket)?;
    if rel == Relation::Eq {
        return if value.is_zero() {
            Ok(Bound::never())
        } else if value.is_one() {
            Ok(Bound::almost_surely())
        } else {
            Err(ParseError::new(vpos, "`=` bounds must be `=0` or `=1`"))
        };
    }
    Bound::new(rel, value).ok_or_else(|| ParseError::new(vpos, "probability bound must lie in [0, 1]"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn parses_the_grammar() {
        let f = parse_formula("a U[>=1] b").unwrap();
        assert_eq!(f, Formula::until(Bound::almost_surely(), Formula::atom("a"), Formula::atom("b")));
        assert!(f.is_qualitative());
        let g = parse_formula("X[>1/2] tt").unwrap();
        assert_eq!(g, Formula::next(Bound::new(Relation::Gt, rat(1, 2)).unwrap(), Formula::True));
        assert!(!g.is_qualitative());
        let h = parse_formula("!(a U[>=1] b)").unwrap();
        assert!(h.is_qualitative());
        let sugar = parse_formula("X[=1](tt U[=0] atZ)").unwrap();
        assert_eq!(sugar.to_string(), "X[>=1] (tt U[<=0] atZ)");
        assert_eq!(parse_formula(&sugar.to_string()).unwrap(), sugar);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(parse_formula("X[>3/2] a").is_err());
        assert!(parse_formula("X[=1/2] a").is_err());
        assert!(parse_formula("(a U[>=1] b").is_err());
    }

    #[test]
    fn negations_move_to_atoms() {
        let f = parse_formula("!!a").unwrap();
        assert_eq!(f.push_negations(false), Formula::atom("a"));
        let g = parse_formula("!(a U[>=1] b)").unwrap().push_negations(false);
        assert_eq!(g, parse_formula("a U[<1] b").unwrap());
        let h = parse_formula("!(a & !b)").unwrap().push_negations(false);
        assert_eq!(h, parse_formula("!a | b").unwrap().push_negations(false));
    }
}
