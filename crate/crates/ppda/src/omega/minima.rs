//! Minima of run prefixes and the chain states they visit.

use super::chain::ChainState;
use super::ObservingAutomaton;
use crate::model::{Configuration, Head, Ppda, StateId};

/// How much of the run a prefix represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    /// The prefix is the whole run.
    Complete,
    /// The run continues; no continuation goes below `floor`.
    Open { floor: usize },
}

/// Positions whose stack length is at most every later length.
///
/// With an open horizon a position also needs a length at most the floor, so
/// no continuation can contradict it.
pub fn minima(lengths: &[usize], horizon: Horizon) -> Vec<usize> {
    let mut suffix_min = match horizon {
        Horizon::Complete => usize::MAX,
        Horizon::Open { floor } => floor,
    };
    let mut out = Vec::new();
    for (i, &len) in lengths.iter().enumerate().rev() {
        if len <= suffix_min {
            out.push(i);
            suffix_min = len;
        }
    }
    out.reverse();
    out
}

/// Which heads can empty their stack, and into which control states.
#[derive(Clone, Debug)]
pub struct PopReach {
    num_states: usize,
    num_symbols: usize,
    /// `pops[head_index][t]`: `pX` can reach `tε`.
    pops: Vec<Vec<bool>>,
    /// `dies[head_index]`: `pX` can reach a stuck head before popping `X`.
    dies: Vec<bool>,
}

impl PopReach {
    pub fn new(ppda: &Ppda) -> Self {
        let (nq, ng) = (ppda.num_states(), ppda.num_symbols());
        let mut pops = vec![vec![false; nq]; nq * ng];
        let mut dies: Vec<bool> = ppda.heads().map(|h| ppda.is_stuck(h)).collect();
        // Least fixed point of the Boolean termination equations; long rules
        // are handled by threading the state sets through the pushed word.
        let mut changed = true;
        while changed {
            changed = false;
            for rule in ppda.rules() {
                let mut reach = vec![false; nq];
                reach[rule.rhs_state.index()] = true;
                let mut stuck = false;
                for &y in &rule.rhs_stack {
                    stuck |= (0..nq).any(|s| reach[s] && dies[s * ng + y.index()]);
                    let mut next = vec![false; nq];
                    for s in (0..nq).filter(|&s| reach[s]) {
                        let row = &pops[s * ng + y.index()];
                        for t in (0..nq).filter(|&t| row[t]) {
                            next[t] = true;
                        }
                    }
                    reach = next;
                }
                let lhs = ppda.head_index(rule.lhs);
                if stuck && !dies[lhs] {
                    dies[lhs] = true;
                    changed = true;
                }
                for t in (0..nq).filter(|&t| reach[t]) {
                    if !pops[lhs][t] {
                        pops[lhs][t] = true;
                        changed = true;
                    }
                }
            }
        }
        PopReach {
            num_states: nq,
            num_symbols: ng,
            pops,
            dies,
        }
    }

    pub fn can_pop(&self, h: Head, t: StateId) -> bool {
        self.pops[h.state.index() * self.num_symbols + h.symbol.index()][t.index()]
    }

    /// Least stack length any run from `c` can reach, or 0 when some run
    /// from `c` gets stuck: a stuck run dies like an emptied one.
    pub fn floor(&self, c: &Configuration) -> usize {
        let mut states = vec![false; self.num_states];
        states[c.state.index()] = true;
        for (k, &x) in c.stack.iter().enumerate() {
            if (0..self.num_states).any(|s| states[s] && self.dies[s * self.num_symbols + x.index()]) {
                return 0;
            }
            let mut next = vec![false; self.num_states];
            for s in (0..self.num_states).filter(|&s| states[s]) {
                for (t, &p) in self.pops[s * self.num_symbols + x.index()].iter().enumerate() {
                    next[t] |= p;
                }
            }
            if !next.contains(&true) {
                return c.len() - k;
            }
            states = next;
        }
        0
    }
}

/// Chain states visited by a run prefix: its entry head, then every
/// certified minimum paired with the observation of the jump into it. A
/// terminated run continues with `⊥`.
pub fn footprint(obs: &ObservingAutomaton, run: &[Configuration], terminated: bool, horizon: Horizon) -> Vec<ChainState> {
    let heads: Vec<Option<Head>> = run.iter().map(Configuration::head).collect();
    let lengths: Vec<usize> = run.iter().map(Configuration::len).collect();
    footprint_of(obs, &heads, &lengths, terminated, horizon)
}

/// [`footprint`] from the head and stack length of every configuration.
pub fn footprint_of(
    obs: &ObservingAutomaton,
    heads: &[Option<Head>],
    lengths: &[usize],
    terminated: bool,
    horizon: Horizon,
) -> Vec<ChainState> {
    let Some(entry) = heads.first().copied().flatten() else {
        return vec![ChainState::Bottom];
    };
    let mut out = vec![ChainState::Entry(entry)];
    if terminated {
        out.push(ChainState::Bottom);
        return out;
    }
    let mut previous: Option<usize> = None;
    for m in minima(lengths, horizon) {
        let Some(head) = heads[m] else { break };
        let a = match previous {
            None => obs.init(),
            Some(p) => obs.observe(heads[p + 1..=m].iter().flatten().copied()),
        };
        out.push(ChainState::Pair(head, a));
        previous = Some(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bernoulli, z_observer};
    use crate::model::parse_configuration;
    use crate::rat;

    #[test]
    fn minima_of_example_runs() {
        // Z; DZ; Z; DZ; Z
        assert_eq!(minima(&[1, 2, 1, 2, 1], Horizon::Complete), vec![0, 2, 4]);
        // Z; DZ; DDZ; DDDZ
        assert_eq!(minima(&[1, 2, 3, 4], Horizon::Complete), vec![0, 1, 2, 3]);
        assert_eq!(minima(&[1, 2, 3, 4], Horizon::Open { floor: 1 }), vec![0]);
        assert_eq!(minima(&[], Horizon::Complete), Vec::<usize>::new());
        assert_eq!(minima(&[3, 2, 2, 5], Horizon::Complete), vec![1, 2, 3]);
    }

    #[test]
    fn floors_follow_pop_reachability() {
        let walk = bernoulli(&rat(2, 3));
        let reach = PopReach::new(&walk);
        let c = |s: &str| parse_configuration(&walk, s).unwrap();
        assert_eq!(reach.floor(&c("IIZ")), 1);
        assert_eq!(reach.floor(&c("DZ")), 1);
        assert_eq!(reach.floor(&c("ID")), 0);
        assert_eq!(reach.floor(&c("Z")), 1);
    }

    #[test]
    fn reachable_stuck_heads_lower_the_floor_to_zero() {
        let sys = crate::model::parse_ppda("pbpa alphabet A B C Z; A -> 1 B; C -> 1/2 C C; C -> 1/2 eps; Z -> 1 C Z;").unwrap();
        let reach = PopReach::new(&sys);
        let c = |s: &str| parse_configuration(&sys, s).unwrap();
        assert_eq!(reach.floor(&c("A Z")), 0);
        assert_eq!(reach.floor(&c("C B Z")), 0);
        assert_eq!(reach.floor(&c("C Z")), 1);
    }

    #[test]
    fn footprints_of_example_runs() {
        let walk = bernoulli(&rat(3, 4));
        let obs = z_observer(&walk);
        let c = |s: &str| parse_configuration(&walk, s).unwrap();
        let h = |s: &str| c(s).head().unwrap();
        let back_and_forth: Vec<_> = ["Z", "DZ", "Z", "DZ", "Z"].into_iter().map(c).collect();
        assert_eq!(
            footprint(&obs, &back_and_forth, false, Horizon::Complete),
            vec![
                ChainState::Entry(h("Z")),
                ChainState::Pair(h("Z"), 0),
                ChainState::Pair(h("Z"), 1),
                ChainState::Pair(h("Z"), 1),
            ]
        );
        let climbing: Vec<_> = ["Z", "IZ", "IIZ", "IIIZ"].into_iter().map(c).collect();
        assert_eq!(
            footprint(&obs, &climbing, false, Horizon::Complete),
            vec![
                ChainState::Entry(h("Z")),
                ChainState::Pair(h("Z"), 0),
                ChainState::Pair(h("I"), 0),
                ChainState::Pair(h("I"), 0),
                ChainState::Pair(h("I"), 0),
            ]
        );
        let dying: Vec<_> = [c("I"), Configuration::empty(StateId(0))].into();
        assert_eq!(
            footprint(&obs, &dying, true, Horizon::Complete),
            vec![ChainState::Entry(h("I")), ChainState::Bottom]
        );
    }
}
