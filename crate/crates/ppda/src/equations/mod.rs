//! The monotone quadratic system whose least solution gives the probabilities
//! of emptying the stack (`⟨pXq⟩`) and of reaching the target with the
//! starting symbol still present (`⟨pX•⟩`).

mod polynomial;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Zero};

pub use polynomial::{Monomial, Polynomial};

use crate::model::{Head, Ppda, RuleShape, StateId};
use crate::regsets::SimpleSet;
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Stack emptied, ending in the given control state.
    PopTo(StateId),
    /// Target reached before the starting symbol is popped.
    Bullet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    pub head: Head,
    pub kind: VarKind,
}

impl VarId {
    pub fn pop_to(head: Head, q: StateId) -> Self {
        VarId {
            head,
            kind: VarKind::PopTo(q),
        }
    }

    pub fn bullet(head: Head) -> Self {
        VarId {
            head,
            kind: VarKind::Bullet,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EqError {
    #[error("rule `{0}` pushes more than two symbols; normalize the system first")]
    NotNormalized(String),
}

/// `x = F(x)` over `[0,1]`; pinned variables have constant right-hand sides
/// and never occur in other equations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotoneSystem {
    vars: Vec<VarId>,
    names: Vec<String>,
    index: HashMap<VarId, usize>,
    rhs: Vec<Polynomial>,
    pinned: BTreeMap<usize, Rational>,
}

/// A point of `[0,1]^n`, indexed like the system's variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Valuation(pub Vec<Rational>);

impl Valuation {
    pub fn constant(n: usize, value: Rational) -> Self {
        Valuation(vec![value; n])
    }

    pub fn get(&self, sys: &MonotoneSystem, v: VarId) -> Option<&Rational> {
        sys.var_index(v).map(|i| &self.0[i])
    }

    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl MonotoneSystem {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn var(&self, i: usize) -> VarId {
        self.vars[i]
    }

    pub fn var_index(&self, v: VarId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn rhs(&self, i: usize) -> &Polynomial {
        &self.rhs[i]
    }

    pub fn pinned(&self) -> &BTreeMap<usize, Rational> {
        &self.pinned
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned.contains_key(&i)
    }

    /// Indices of variables that are not pinned.
    pub fn free_vars(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vars.len()).filter(|i| !self.pinned.contains_key(i))
    }

    /// One application of the operator, capped at 1. The cap changes neither
    /// the least fixed point nor the validity of post-fixed certificates, and
    /// keeps the operator inside `[0,1]^n` when several control states make
    /// the raw sums exceed 1.
    pub fn evaluate(&self, v: &Valuation) -> Valuation {
        let one = Rational::one();
        Valuation(
            self.rhs
                .iter()
                .map(|p| {
                    let x = p.eval(&v.0);
                    if x > one {
                        one.clone()
                    } else {
                        x
                    }
                })
                .collect(),
        )
    }

    /// Same variables with every coefficient positive replaced by `true`.
    pub fn boolean_abstraction(&self) -> BooleanSystem {
        BooleanSystem {
            rhs: self
                .rhs
                .iter()
                .map(|p| p.terms().map(|(m, _)| m.clone()).collect())
                .collect(),
        }
    }

    /// Pins every variable whose least solution is 0, as certified by the
    /// Boolean abstraction.
    pub fn prune_zeros(&self) -> MonotoneSystem {
        let positive = self.boolean_abstraction().least_fixed_point();
        let zero = |i: usize| (!positive[i]).then(|| Polynomial::zero());
        let mut out = self.clone();
        for i in 0..self.vars.len() {
            if !positive[i] {
                out.rhs[i] = Polynomial::zero();
                out.pinned.insert(i, Rational::zero());
            } else if !self.is_pinned(i) {
                out.rhs[i] = self.rhs[i].substitute(&zero);
            }
        }
        out
    }

    /// One equation per line, sorted by variable.
    pub fn dump(&self) -> String {
        let mut order: Vec<usize> = (0..self.vars.len()).collect();
        order.sort_by_key(|&i| self.vars[i]);
        let name = |i: usize| self.names[i].clone();
        let mut out = String::new();
        for i in order {
            out.push_str(&format!("{} = {}\n", self.names[i], self.rhs[i].display_with(&name)));
        }
        out
    }

    /// Variables occurring in the right-hand side of `i`.
    pub fn dependencies(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rhs[i].variables()
    }
}

impl fmt::Display for MonotoneSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Name of a variable in dumps: `[X,ε]`/`[X,•]` for stateless systems,
/// `[p X q]`/`[p X •]` otherwise.
pub fn var_name(ppda: &Ppda, v: VarId) -> String {
    let x = ppda.symbol_name(v.head.symbol);
    if ppda.stateless_syntax() {
        match v.kind {
            VarKind::PopTo(_) => format!("[{x},ε]"),
            VarKind::Bullet => format!("[{x},•]"),
        }
    } else {
        let p = ppda.state_name(v.head.state);
        match v.kind {
            VarKind::PopTo(q) => format!("[{p} {x} {}]", ppda.state_name(q)),
            VarKind::Bullet => format!("[{p} {x} •]"),
        }
    }
}

/// Builds the system for `P(·, C₁ U C₂)` over the heads of a normalized system.
///
/// `⟨pXq⟩` counts paths through `C₁∖C₂` that empty the stack into `qε`;
/// `⟨pX•⟩` counts paths through `C₁` that reach `C₂` before `X` is popped.
pub fn build_until_system(ppda: &Ppda, c1: &SimpleSet, c2: &SimpleSet) -> Result<MonotoneSystem, EqError> {
    if let Some(r) = ppda.rules().iter().find(|r| r.rhs_stack.len() > 2) {
        return Err(EqError::NotNormalized(ppda.display_rule(r)));
    }
    let nq = ppda.num_states();
    let width = nq + 1;
    let slot = |h: Head, kind: VarKind| {
        ppda.head_index(h) * width
            + match kind {
                VarKind::PopTo(q) => q.index(),
                VarKind::Bullet => nq,
            }
    };
    let mut vars = Vec::with_capacity(ppda.num_heads() * width);
    for h in ppda.heads() {
        vars.extend(ppda.states().map(|q| VarId::pop_to(h, q)));
        vars.push(VarId::bullet(h));
    }
    let mut pinned = BTreeMap::new();
    for h in ppda.heads() {
        let in1 = c1.contains_head(h);
        let in2 = c2.contains_head(h);
        if !in1 || in2 {
            for q in ppda.states() {
                pinned.insert(slot(h, VarKind::PopTo(q)), Rational::zero());
            }
        }
        if in2 {
            pinned.insert(slot(h, VarKind::Bullet), Rational::one());
        } else if !in1 {
            pinned.insert(slot(h, VarKind::Bullet), Rational::zero());
        }
    }
    let value = |i: usize| pinned.get(&i).map(|c: &Rational| Polynomial::constant(c.clone()));
    let term = |i: usize| value(i).unwrap_or_else(|| Polynomial::var(i));

    let mut rhs = vec![Polynomial::zero(); vars.len()];
    for (i, c) in &pinned {
        rhs[*i] = Polynomial::constant(c.clone());
    }
    for (i, var) in vars.iter().enumerate() {
        if pinned.contains_key(&i) {
            continue;
        }
        let mut poly = Polynomial::zero();
        for rule in ppda.rules_of(var.head) {
            let x = Polynomial::constant(rule.prob.value().clone());
            let r = rule.rhs_state;
            let contribution = match (rule.shape(), var.kind) {
                (RuleShape::Pop, VarKind::PopTo(q)) if r == q => x,
                (RuleShape::Pop, _) => continue,
                (RuleShape::Swap(y), kind) => x.mul(&term(slot(Head::new(r, y), kind))),
                (RuleShape::Push(y, below), kind) => {
                    let top = Head::new(r, y);
                    let mut sum = match kind {
                        VarKind::Bullet => term(slot(top, VarKind::Bullet)),
                        VarKind::PopTo(_) => Polynomial::zero(),
                    };
                    for t in ppda.states() {
                        let first = term(slot(top, VarKind::PopTo(t)));
                        let second = term(slot(Head::new(t, below), kind));
                        sum = sum.add(&first.mul(&second));
                    }
                    x.mul(&sum)
                }
                (RuleShape::Long, _) => unreachable!("checked above"),
            };
            poly = poly.add(&contribution);
        }
        rhs[i] = poly;
    }
    let names = vars.iter().map(|&v| var_name(ppda, v)).collect();
    let index = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    Ok(MonotoneSystem {
        vars,
        names,
        index,
        rhs,
        pinned,
    })
}

/// The system with `+`/`·` read as `∨`/`∧`; each right-hand side is a
/// disjunction of conjunctions of variables (the empty conjunction is true).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanSystem {
    pub rhs: Vec<Vec<Monomial>>,
}

impl BooleanSystem {
    /// Least solution, by counting unsatisfied factors per monomial.
    pub fn least_fixed_point(&self) -> Vec<bool> {
        let n = self.rhs.len();
        let mut value = vec![false; n];
        // (variable, monomial) per distinct factor occurrence
        let mut watchers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut missing: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut queue = Vec::new();
        for (i, monos) in self.rhs.iter().enumerate() {
            let mut counts = Vec::with_capacity(monos.len());
            for (k, m) in monos.iter().enumerate() {
                let mut distinct = m.clone();
                distinct.dedup();
                for &v in &distinct {
                    watchers[v as usize].push((i, k));
                }
                counts.push(distinct.len());
                if distinct.is_empty() && !value[i] {
                    value[i] = true;
                    queue.push(i);
                }
            }
            missing.push(counts);
        }
        while let Some(v) = queue.pop() {
            for &(i, k) in &watchers[v] {
                missing[i][k] -= 1;
                if missing[i][k] == 0 && !value[i] {
                    value[i] = true;
                    queue.push(i);
                }
            }
        }
        value
    }
}
