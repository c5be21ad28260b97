//! Tokenizer shared by the system, automaton, observer and formula formats.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Number(Rational),
    Arrow,
    Semi,
    Comma,
    Dot,
    Colon,
    Slash,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Star,
    Plus,
    Minus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "`{n}`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
        }
    }
}

/// Line and column, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Error raised while reading any of the text formats.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {}, column {}: {message}", pos.line, pos.col)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == 'ε' || c == '•'
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let two = |t: Tok| Some((t, 2));
        let one = |t: Tok| Some((t, 1));
        let punct = match (c, next) {
            ('-', Some('>')) => two(Tok::Arrow),
            ('<', Some('=')) => two(Tok::Le),
            ('>', Some('=')) => two(Tok::Ge),
            ('→', _) => one(Tok::Arrow),
            ('≤', _) => one(Tok::Le),
            ('≥', _) => one(Tok::Ge),
            ('<', _) => one(Tok::Lt),
            ('>', _) => one(Tok::Gt),
            ('=', _) => one(Tok::Eq),
            (';', _) => one(Tok::Semi),
            (',', _) => one(Tok::Comma),
            ('.', _) => one(Tok::Dot),
            (':', _) => one(Tok::Colon),
            ('/', _) => one(Tok::Slash),
            ('{', _) => one(Tok::LBrace),
            ('}', _) => one(Tok::RBrace),
            ('[', _) => one(Tok::LBracket),
            (']', _) => one(Tok::RBracket),
            ('(', _) => one(Tok::LParen),
            (')', _) => one(Tok::RParen),
            ('!', _) | ('¬', _) => one(Tok::Bang),
            ('&', _) | ('∧', _) => one(Tok::Amp),
            ('|', _) | ('∨', _) => one(Tok::Pipe),
            ('*', _) => one(Tok::Star),
            ('+', _) => one(Tok::Plus),
            ('-', _) => one(Tok::Minus),
            _ => None,
        };
        if let Some((tok, n)) = punct {
            out.push((tok, pos));
            advance(n, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut digits = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                digits.push(chars[i]);
                i += 1;
            }
            let mut value = Rational::from_integer(digits.parse::<BigInt>().unwrap_or_default());
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                let mut frac = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    frac.push(chars[i]);
                    i += 1;
                }
                let den = num_traits::pow(BigInt::from(10), frac.len());
                value += Rational::new(frac.parse::<BigInt>().unwrap_or_default(), den);
            }
            col += i - start;
            out.push((Tok::Number(value), pos));
            continue;
        }
        if is_ident_char(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        return Err(ParseError::new(pos, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

/// Cursor over a token stream.
pub(crate) struct Cursor {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Cursor {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        let toks = tokenize(src)?;
        let lines = src.lines().count().max(1);
        let last_len = src.lines().last().map(|l| l.chars().count()).unwrap_or(0);
        Ok(Cursor {
            toks,
            at: 0,
            end: Pos {
                line: lines,
                col: last_len + 1,
            },
        })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    pub(crate) fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.at + k).map(|(t, _)| t)
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    pub(crate) fn is_done(&self) -> bool {
        self.at >= self.toks.len()
    }

    pub(crate) fn bump(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.pos(), message)
    }

    fn describe_next(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        }
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, tok: &Tok) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.eat(tok) {
            Ok(pos)
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.describe_next())))
        }
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok((s, pos))
            }
            _ => Err(self.error(format!("expected a name, found {}", self.describe_next()))),
        }
    }

    /// `a`, `a/b` or a decimal literal.
    pub(crate) fn rational(&mut self) -> Result<(Rational, Pos), ParseError> {
        let pos = self.pos();
        let num = match self.peek() {
            Some(Tok::Number(n)) => n.clone(),
            _ => {
                return Err(self.error(format!(
                    "expected a rational number, found {}",
                    self.describe_next()
                )))
            }
        };
        self.at += 1;
        if self.eat(&Tok::Slash) {
            let den_pos = self.pos();
            let den = match self.bump() {
                Some((Tok::Number(d), _)) => d,
                _ => return Err(ParseError::new(den_pos, "expected a denominator")),
            };
            if den.is_zero() {
                return Err(ParseError::new(den_pos, "zero denominator"));
            }
            return Ok((num / den, pos));
        }
        Ok((num, pos))
    }

    pub(crate) fn expect_end(&self) -> Result<(), ParseError> {
        if self.is_done() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.describe_next())))
        }
    }
}

/// Renders a rational as `a/b` (or `a` for integers).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `a`, `a/b` or a decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseError> {
    let mut cur = Cursor::new(text)?;
    let negative = cur.eat(&Tok::Minus);
    let (r, _) = cur.rational()?;
    cur.expect_end()?;
    Ok(if negative { -r } else { r })
}
