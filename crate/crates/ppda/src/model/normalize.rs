use super::{Head, Ppda, Prob, Rule, StateId, SymbolId};

/// Prefix reserved for states and symbols introduced by [`normalize`]; the
/// input grammar cannot produce it.
pub const FRESH_PREFIX: char = '%';

/// Where a fresh symbol (and, for multi-state systems, its fresh control
/// state) came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreshOrigin {
    /// Index of the long rule in the original system.
    pub rule: usize,
    pub symbol: SymbolId,
    pub state: Option<StateId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub ppda: Ppda,
    pub fresh: Vec<FreshOrigin>,
}

impl Normalized {
    pub fn num_original_states(&self) -> usize {
        self.ppda.num_states() - self.fresh.iter().filter(|f| f.state.is_some()).count()
    }

    pub fn num_original_symbols(&self) -> usize {
        self.ppda.num_symbols() - self.fresh.len()
    }
}

/// Splits every rule with more than two pushed symbols.
///
/// `pX -x-> qY₁…Yₖ` becomes `pX -x-> p'Y'Yₖ` followed by `p'Y' -1-> qY₁…Yₖ₋₁`,
/// repeated until the tail has length two. Single-state systems reuse their
/// state so the result stays a pBPA. Original ids are unchanged; fresh ones are
/// appended.
pub fn normalize(ppda: &Ppda) -> Normalized {
    let mut states = ppda.state_names().to_vec();
    let mut symbols = ppda.symbol_names().to_vec();
    let mut rules = Vec::with_capacity(ppda.rules().len());
    let mut fresh = Vec::new();
    let stateless = ppda.is_pbpa();

    for (index, rule) in ppda.rules().iter().enumerate() {
        if rule.rhs_stack.len() <= 2 {
            rules.push(rule.clone());
            continue;
        }
        let mut lhs = rule.lhs;
        let mut prob = rule.prob.clone();
        let mut word = rule.rhs_stack.clone();
        while word.len() > 2 {
            let bottom = word.pop().expect("word longer than two");
            let symbol = SymbolId(symbols.len() as u32);
            symbols.push(format!("{FRESH_PREFIX}{}", symbols.len()));
            let state = if stateless {
                None
            } else {
                let q = StateId(states.len() as u32);
                states.push(format!("{FRESH_PREFIX}{}", states.len()));
                Some(q)
            };
            let via = state.unwrap_or(StateId(0));
            rules.push(Rule {
                lhs,
                rhs_state: via,
                rhs_stack: vec![symbol, bottom],
                prob,
            });
            fresh.push(FreshOrigin {
                rule: index,
                symbol,
                state,
            });
            lhs = Head::new(via, symbol);
            prob = Prob::one();
        }
        rules.push(Rule {
            lhs,
            rhs_state: rule.rhs_state,
            rhs_stack: word,
            prob,
        });
    }
    let out = Ppda::new(states, symbols, rules)
        .expect("normalization keeps ids in range")
        .with_stateless_syntax(ppda.stateless_syntax());
    Normalized { ppda: out, fresh }
}
