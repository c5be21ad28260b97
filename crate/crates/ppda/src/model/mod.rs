//! Probabilistic pushdown automata: states, stack symbols and rules with exact
//! rational probabilities.
//!
//! Stacks are stored topmost symbol first. A system with a single control state
//! is a pBPA.

mod normalize;
mod parse;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Zero};

pub use normalize::{normalize, FreshOrigin, Normalized, FRESH_PREFIX};
pub use parse::{parse_configuration, parse_head, parse_ppda};

use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Control state together with a top-of-stack symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Head {
    pub state: StateId,
    pub symbol: SymbolId,
}

impl Head {
    pub fn new(state: StateId, symbol: SymbolId) -> Self {
        Head { state, symbol }
    }
}

/// A control state and a stack word, top first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: StateId,
    pub stack: Vec<SymbolId>,
}

impl Configuration {
    pub fn new(state: StateId, stack: Vec<SymbolId>) -> Self {
        Configuration { state, stack }
    }

    pub fn empty(state: StateId) -> Self {
        Configuration {
            state,
            stack: Vec::new(),
        }
    }

    pub fn head(&self) -> Option<Head> {
        self.stack.first().map(|&symbol| Head::new(self.state, symbol))
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }
}

/// Rule probability in `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prob(Rational);

impl Prob {
    pub fn new(value: Rational) -> Result<Self, ModelError> {
        if value <= Rational::zero() || value > Rational::one() {
            return Err(ModelError::ProbabilityOutOfRange(value));
        }
        Ok(Prob(value))
    }

    pub fn one() -> Self {
        Prob(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub lhs: Head,
    pub rhs_state: StateId,
    /// Replacement for the top symbol, top first.
    pub rhs_stack: Vec<SymbolId>,
    pub prob: Prob,
}

/// Shape of a rule's right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleShape {
    Pop,
    Swap(SymbolId),
    Push(SymbolId, SymbolId),
    Long,
}

impl Rule {
    pub fn shape(&self) -> RuleShape {
        match self.rhs_stack.as_slice() {
            [] => RuleShape::Pop,
            [y] => RuleShape::Swap(*y),
            [y, z] => RuleShape::Push(*y, *z),
            _ => RuleShape::Long,
        }
    }

    /// Head of the successor configuration when the rule does not pop.
    pub fn rhs_head(&self) -> Option<Head> {
        self.rhs_stack
            .first()
            .map(|&y| Head::new(self.rhs_state, y))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("probability {0} is outside (0, 1]")]
    ProbabilityOutOfRange(Rational),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("rule {0} refers to an unknown state or symbol")]
    UnknownId(usize),
    #[error("rule `{0}` is listed twice")]
    DuplicateRule(String),
    #[error("a pBPA has exactly one control state, found {0}")]
    NotStateless(usize),
}

/// A probabilistic pushdown automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ppda {
    states: Vec<String>,
    symbols: Vec<String>,
    rules: Vec<Rule>,
    by_head: Vec<Vec<usize>>,
    stateless_syntax: bool,
}

impl Ppda {
    pub fn new(states: Vec<String>, symbols: Vec<String>, rules: Vec<Rule>) -> Result<Self, ModelError> {
        for names in [&states, &symbols] {
            let mut seen = std::collections::HashSet::new();
            for n in names.iter() {
                if !seen.insert(n) {
                    return Err(ModelError::DuplicateName(n.clone()));
                }
            }
        }
        let (nq, ng) = (states.len(), symbols.len());
        let mut by_head = vec![Vec::new(); nq * ng];
        let mut seen = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            let in_range = r.lhs.state.index() < nq
                && r.rhs_state.index() < nq
                && r.lhs.symbol.index() < ng
                && r.rhs_stack.iter().all(|s| s.index() < ng);
            if !in_range {
                return Err(ModelError::UnknownId(i));
            }
            if seen.insert((r.lhs, r.rhs_state, r.rhs_stack.clone()), i).is_some() {
                return Err(ModelError::DuplicateRule(i.to_string()));
            }
            by_head[r.lhs.state.index() * ng + r.lhs.symbol.index()].push(i);
        }
        Ok(Ppda {
            states,
            symbols,
            rules,
            by_head,
            stateless_syntax: false,
        })
    }

    /// Builds a pBPA; its single control state is named `p`.
    pub fn stateless(symbols: Vec<String>, rules: Vec<Rule>) -> Result<Self, ModelError> {
        let mut ppda = Ppda::new(vec!["p".to_string()], symbols, rules)?;
        ppda.stateless_syntax = true;
        Ok(ppda)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn num_heads(&self) -> usize {
        self.states.len() * self.symbols.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.index()]
    }

    pub fn symbol_name(&self, x: SymbolId) -> &str {
        &self.symbols[x.index()]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn symbol_names(&self) -> &[String] {
        &self.symbols
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| StateId(i as u32))
    }

    pub fn symbol_id(&self, name: &str) -> Option<SymbolId> {
        self.symbols.iter().position(|s| s == name).map(|i| SymbolId(i as u32))
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn symbols(&self) -> impl Iterator<Item = SymbolId> {
        (0..self.symbols.len() as u32).map(SymbolId)
    }

    pub fn heads(&self) -> impl Iterator<Item = Head> + '_ {
        self.states()
            .flat_map(move |q| self.symbols().map(move |x| Head::new(q, x)))
    }

    /// Dense index of a head, `state * |Γ| + symbol`.
    pub fn head_index(&self, h: Head) -> usize {
        h.state.index() * self.symbols.len() + h.symbol.index()
    }

    pub fn head_at(&self, index: usize) -> Head {
        let ng = self.symbols.len();
        Head::new(StateId((index / ng) as u32), SymbolId((index % ng) as u32))
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule_indices(&self, h: Head) -> &[usize] {
        &self.by_head[self.head_index(h)]
    }

    pub fn rules_of(&self, h: Head) -> impl Iterator<Item = &Rule> + '_ {
        self.rule_indices(h).iter().map(move |&i| &self.rules[i])
    }

    pub fn is_stuck(&self, h: Head) -> bool {
        self.rule_indices(h).is_empty()
    }

    pub fn is_pbpa(&self) -> bool {
        self.states.len() == 1
    }

    /// True when the system was declared with the `pbpa` header or built by
    /// [`Ppda::stateless`]; configurations then print without a state.
    pub fn stateless_syntax(&self) -> bool {
        self.stateless_syntax && self.is_pbpa()
    }

    pub fn is_normalized(&self) -> bool {
        self.rules.iter().all(|r| r.rhs_stack.len() <= 2)
    }

    pub fn max_rhs_len(&self) -> usize {
        self.rules.iter().map(|r| r.rhs_stack.len()).max().unwrap_or(0)
    }

    pub(crate) fn with_stateless_syntax(mut self, flag: bool) -> Self {
        self.stateless_syntax = flag;
        self
    }

    pub fn display_head(&self, h: Head) -> String {
        if self.stateless_syntax() {
            self.symbol_name(h.symbol).to_string()
        } else {
            format!("{}.{}", self.state_name(h.state), self.symbol_name(h.symbol))
        }
    }

    pub fn display_word(&self, w: &[SymbolId]) -> String {
        if w.is_empty() {
            return "eps".to_string();
        }
        let compact = w.iter().all(|&x| self.symbol_name(x).chars().count() == 1);
        let names: Vec<&str> = w.iter().map(|&x| self.symbol_name(x)).collect();
        if compact {
            names.concat()
        } else {
            names.join(" ")
        }
    }

    pub fn display_config(&self, c: &Configuration) -> String {
        let word = self.display_word(&c.stack);
        if self.stateless_syntax() {
            word
        } else {
            format!("{}:{}", self.state_name(c.state), word)
        }
    }

    pub fn display_rule(&self, r: &Rule) -> String {
        let rhs = if r.rhs_stack.is_empty() {
            "eps".to_string()
        } else {
            r.rhs_stack
                .iter()
                .map(|&x| self.symbol_name(x))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let p = crate::text::format_rational(r.prob.value());
        if self.stateless_syntax() {
            format!("{} -> {} {}", self.symbol_name(r.lhs.symbol), p, rhs)
        } else {
            format!(
                "{} {} -> {} {} {}",
                self.state_name(r.lhs.state),
                self.symbol_name(r.lhs.symbol),
                p,
                self.state_name(r.rhs_state),
                rhs
            )
        }
    }

    /// Text in the input format; parsing it gives back an equal system.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.stateless_syntax() {
            out.push_str("pbpa\n");
        } else {
            out.push_str("ppda\n");
            out.push_str(&format!("states {};\n", self.states.join(" ")));
        }
        out.push_str(&format!("alphabet {};\n", self.symbols.join(" ")));
        for r in &self.rules {
            out.push_str(&self.display_rule(r));
            out.push_str(";\n");
        }
        out
    }
}

/// Heads whose outgoing probabilities do not sum to 0 or 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<(Head, Rational)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(ppda: &Ppda) -> ValidationReport {
    let mut sums: BTreeMap<Head, Rational> = BTreeMap::new();
    for r in ppda.rules() {
        *sums.entry(r.lhs).or_insert_with(Rational::zero) += r.prob.value();
    }
    let violations = sums
        .into_iter()
        .filter(|(_, s)| !s.is_zero() && !s.is_one())
        .collect();
    ValidationReport { violations }
}

/// One-step successors with their probabilities; empty for dead configurations.
pub fn successors(ppda: &Ppda, c: &Configuration) -> Vec<(Configuration, Prob)> {
    let Some(h) = c.head() else {
        return Vec::new();
    };
    ppda.rules_of(h)
        .map(|r| {
            let mut stack = r.rhs_stack.clone();
            stack.extend_from_slice(&c.stack[1..]);
            (Configuration::new(r.rhs_state, stack), r.prob.clone())
        })
        .collect()
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}.X{}", self.state.0, self.symbol.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bernoulli;
    use crate::rat;

    #[test]
    fn successors_of_bernoulli_configurations() {
        let sys = bernoulli(&rat(1, 2));
        let cfg = parse_configuration(&sys, "Z").unwrap();
        let succ: Vec<(String, Rational)> = successors(&sys, &cfg)
            .into_iter()
            .map(|(c, p)| (sys.display_config(&c), p.into_inner()))
            .collect();
        assert_eq!(succ, vec![("IZ".into(), rat(1, 2)), ("DZ".into(), rat(1, 2))]);

        let cfg = parse_configuration(&sys, "IZ").unwrap();
        let succ: Vec<String> = successors(&sys, &cfg)
            .into_iter()
            .map(|(c, _)| sys.display_config(&c))
            .collect();
        assert_eq!(succ, vec!["IIZ", "Z"]);
        assert!(successors(&sys, &Configuration::empty(StateId(0))).is_empty());
    }

    #[test]
    fn validation_reports_partial_heads() {
        let sys = parse_ppda("pbpa alphabet A B; A -> 1/3 B; B -> 1/3 A; B -> 2/3 eps;").unwrap();
        let report = validate(&sys);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].1, rat(1, 3));
        assert!(validate(&bernoulli(&rat(2, 3))).is_ok());
    }

    #[test]
    fn probabilities_must_be_in_unit_interval() {
        assert!(Prob::new(rat(3, 2)).is_err());
        assert!(Prob::new(rat(0, 1)).is_err());
        assert!(Prob::new(rat(1, 1)).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let sys = bernoulli(&rat(1, 3));
        assert_eq!(parse_ppda(&sys.to_text()).unwrap(), sys);
    }
}
