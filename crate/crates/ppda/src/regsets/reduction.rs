use std::collections::{BTreeSet, HashMap};

use super::{explore, DeltaAutomaton, RegError, SimpleSet};
use crate::model::{Configuration, Head, Ppda, Rule, StateId, SymbolId};

/// A system whose stack symbols carry, for every automaton and every start
/// state, the automaton state reached on the stack below them. Membership in
/// each regular set then depends on the head only.
#[derive(Clone, Debug)]
pub struct RegSimReduction {
    pub product: Ppda,
    /// `simple_images[j]` is the image of the set recognized by automaton `j`.
    pub simple_images: Vec<SimpleSet>,
    automata: Vec<DeltaAutomaton>,
    num_states: usize,
    num_symbols: usize,
    /// Annotation vectors, indexed `[automaton * num_states + start]`.
    vectors: Vec<Vec<u32>>,
    /// `advance[v * num_symbols + x]`: vector after pushing `x` on a stack with vector `v`.
    advance: Vec<usize>,
}

impl RegSimReduction {
    pub fn num_vectors(&self) -> usize {
        self.vectors.len()
    }

    /// Product symbol for original symbol `x` annotated with vector `v`.
    pub fn annotated(&self, x: SymbolId, vector: usize) -> SymbolId {
        SymbolId((vector * self.num_symbols + x.index()) as u32)
    }

    /// Original symbol and vector of a product symbol.
    pub fn split(&self, y: SymbolId) -> (SymbolId, usize) {
        let i = y.index();
        (SymbolId((i % self.num_symbols) as u32), i / self.num_symbols)
    }

    pub fn embed(&self, c: &Configuration) -> Configuration {
        let mut v = 0;
        let mut stack = vec![SymbolId(0); c.len()];
        for (k, &x) in c.stack.iter().enumerate().rev() {
            stack[k] = self.annotated(x, v);
            v = self.advance[v * self.num_symbols + x.index()];
        }
        Configuration::new(c.state, stack)
    }

    /// Drops the annotations; `None` when they are inconsistent.
    pub fn project(&self, c: &Configuration) -> Option<Configuration> {
        let mut v = 0;
        let mut stack = vec![SymbolId(0); c.len()];
        for (k, &y) in c.stack.iter().enumerate().rev() {
            let (x, w) = self.split(y);
            if w != v {
                return None;
            }
            stack[k] = x;
            v = self.advance[v * self.num_symbols + x.index()];
        }
        Some(Configuration::new(c.state, stack))
    }

    /// Accepts exactly the embeddings of original configurations.
    pub fn consistency_automaton(&self) -> DeltaAutomaton {
        let ng = self.product.num_symbols();
        let initial = vec![Some(0usize); self.num_states];
        explore(
            self.num_states,
            ng,
            initial,
            |key, y| {
                let (x, w) = self.split(y);
                match key {
                    Some(v) if *v == w => Some(self.advance[w * self.num_symbols + x.index()]),
                    _ => None,
                }
            },
            |key| key.is_some(),
        )
    }

    /// The original configurations whose embedding `set` accepts: intersect
    /// with the consistent annotations, then project the vectors away.
    pub fn map_back(&self, set: &DeltaAutomaton) -> Result<DeltaAutomaton, RegError> {
        let consistent = set.intersect(&self.consistency_automaton())?;
        let initial = (0..self.num_states).map(|p| BTreeSet::from([p])).collect();
        let ng = self.num_symbols;
        Ok(explore(
            self.num_states,
            ng,
            initial,
            |states: &BTreeSet<usize>, x| {
                let mut next = BTreeSet::new();
                for &s in states {
                    for v in 0..self.vectors.len() {
                        next.insert(consistent.step(s, self.annotated(x, v)));
                    }
                }
                next
            },
            |states| states.iter().any(|&s| consistent.is_accepting(s)),
        )
        .minimize())
    }

    pub fn automata(&self) -> &[DeltaAutomaton] {
        &self.automata
    }
}

/// Builds the annotated product of `ppda` with the automata in `regs`.
pub fn reduce_to_simple(ppda: &Ppda, regs: &[DeltaAutomaton]) -> Result<RegSimReduction, RegError> {
    let nq = ppda.num_states();
    let ng = ppda.num_symbols();
    for a in regs {
        if a.num_control() != nq || a.num_symbols() != ng {
            return Err(RegError::DimensionMismatch {
                left: (nq, ng),
                right: (a.num_control(), a.num_symbols()),
            });
        }
    }
    let start: Vec<u32> = regs
        .iter()
        .flat_map(|_| 0..nq as u32)
        .collect();
    let mut vectors = vec![start.clone()];
    let mut index: HashMap<Vec<u32>, usize> = HashMap::from([(start, 0)]);
    let mut advance = Vec::new();
    let mut i = 0;
    while i < vectors.len() {
        for x in ppda.symbols() {
            let next: Vec<u32> = vectors[i]
                .iter()
                .enumerate()
                .map(|(k, &s)| regs[k / nq].step(s as usize, x) as u32)
                .collect();
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    vectors.push(next.clone());
                    index.insert(next, vectors.len() - 1);
                    vectors.len() - 1
                }
            };
            advance.push(id);
        }
        i += 1;
    }

    let mut symbols = Vec::with_capacity(vectors.len() * ng);
    for v in 0..vectors.len() {
        for x in ppda.symbols() {
            symbols.push(format!("{}@{v}", ppda.symbol_name(x)));
        }
    }
    let annotated = |x: SymbolId, v: usize| SymbolId((v * ng + x.index()) as u32);
    let mut rules = Vec::with_capacity(ppda.rules().len() * vectors.len());
    for v in 0..vectors.len() {
        for rule in ppda.rules() {
            // Annotate the pushed word from the bottom, starting at the vector of the replaced symbol.
            let mut w = v;
            let mut stack = vec![SymbolId(0); rule.rhs_stack.len()];
            for (k, &y) in rule.rhs_stack.iter().enumerate().rev() {
                stack[k] = annotated(y, w);
                w = advance[w * ng + y.index()];
            }
            rules.push(Rule {
                lhs: Head::new(rule.lhs.state, annotated(rule.lhs.symbol, v)),
                rhs_state: rule.rhs_state,
                rhs_stack: stack,
                prob: rule.prob.clone(),
            });
        }
    }
    let product = Ppda::new(ppda.state_names().to_vec(), symbols, rules)
        .expect("annotated rules stay within range")
        .with_stateless_syntax(ppda.stateless_syntax());

    let simple_images = regs
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let mut heads = BTreeSet::new();
            for (v, vector) in vectors.iter().enumerate() {
                for p in ppda.states() {
                    let below = vector[j * nq + p.index()] as usize;
                    for x in ppda.symbols() {
                        if a.is_accepting(a.step(below, x)) {
                            heads.insert(Head::new(p, annotated(x, v)));
                        }
                    }
                }
            }
            let eps = ppda
                .states()
                .filter(|p| a.is_accepting(p.index()))
                .collect::<BTreeSet<StateId>>();
            SimpleSet::new(heads, eps)
        })
        .collect();

    Ok(RegSimReduction {
        product,
        simple_images,
        automata: regs.to_vec(),
        num_states: nq,
        num_symbols: ng,
        vectors,
        advance,
    })
}
