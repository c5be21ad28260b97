//! Monte Carlo sampling of runs, used to cross-check certified results.
//!
//! Runs are driven by SplitMix64. A batch with seed `s` derives one seed per
//! run from a SplitMix64 stream started at `s`, so results do not depend on
//! thread scheduling. A rule is chosen by comparing a uniform 64-bit draw
//! `u` against the cumulative probabilities scaled by `2⁶⁴`, so the choice is
//! exact up to that scaling.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use crate::mc::BsccClassification;
use crate::model::{Configuration, Head, Ppda, StateId, SymbolId};
use crate::omega::{footprint_of, Horizon, MinChain, ObservingAutomaton, PopReach};
use crate::regsets::SimpleSet;

/// One sampled run; `rules[i]` leads from `configs[i]` to `configs[i + 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSample {
    pub seed: u64,
    pub configs: Vec<Configuration>,
    pub rules: Vec<usize>,
    /// Ended in a configuration without successors.
    pub terminated: bool,
    /// Stopped at the step bound.
    pub truncated: bool,
}

/// Per-head rule tables with cumulative thresholds out of `2⁶⁴`.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    ppda: &'a Ppda,
    thresholds: Vec<Vec<(u128, usize)>>,
}

impl<'a> Sampler<'a> {
    pub fn new(ppda: &'a Ppda) -> Self {
        let scale = BigInt::from(1u128 << 64);
        let thresholds = ppda
            .heads()
            .map(|h| {
                let mut cumulative = crate::Rational::from_integer(0.into());
                let rules = ppda.rule_indices(h);
                rules
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| {
                        cumulative += ppda.rules()[r].prob.value();
                        let t = if k + 1 == rules.len() {
                            // Guard against a draw beyond a total below one by rounding.
                            1u128 << 64
                        } else {
                            (cumulative.numer() * &scale / cumulative.denom()).to_u128().expect("at most 2^64")
                        };
                        (t, r)
                    })
                    .collect()
            })
            .collect();
        Sampler { ppda, thresholds }
    }

    fn choose(&self, h: Head, rng: &mut SplitMix64) -> Option<usize> {
        let table = &self.thresholds[self.ppda.head_index(h)];
        if table.is_empty() {
            return None;
        }
        let u = u128::from(rng.next_u64());
        table.iter().find(|(t, _)| u < *t).map(|&(_, r)| r)
    }

    /// Applies one step to a stack stored bottom first; `None` when dead.
    fn step(&self, state: &mut StateId, stack: &mut Vec<SymbolId>, rng: &mut SplitMix64) -> Option<usize> {
        let top = *stack.last()?;
        let r = self.choose(Head::new(*state, top), rng)?;
        let rule = &self.ppda.rules()[r];
        stack.pop();
        stack.extend(rule.rhs_stack.iter().rev());
        *state = rule.rhs_state;
        Some(r)
    }

    /// Walks from `c`, calling `visit` on each configuration (stack bottom
    /// first) until it returns `Some`; `None` at the step bound or when dead.
    /// Also returns the last configuration visited.
    fn walk<T>(
        &self,
        c: &Configuration,
        max_steps: usize,
        seed: u64,
        mut visit: impl FnMut(StateId, &[SymbolId]) -> Option<T>,
    ) -> (Option<T>, Outcome, Configuration) {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut state = c.state;
        let mut stack: Vec<SymbolId> = c.stack.iter().rev().copied().collect();
        for step in 0..=max_steps {
            if let Some(v) = visit(state, &stack) {
                return (Some(v), Outcome::Decided, config_of(state, &stack));
            }
            if step == max_steps {
                break;
            }
            if self.step(&mut state, &mut stack, &mut rng).is_none() {
                return (None, Outcome::Terminated, config_of(state, &stack));
            }
        }
        (None, Outcome::Truncated, config_of(state, &stack))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Decided,
    Terminated,
    Truncated,
}

fn config_of(state: StateId, stack: &[SymbolId]) -> Configuration {
    Configuration::new(state, stack.iter().rev().copied().collect())
}

/// Samples one run of at most `max_steps` steps.
pub fn sample_run(ppda: &Ppda, c: &Configuration, max_steps: usize, seed: u64) -> RunSample {
    let sampler = Sampler::new(ppda);
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut state = c.state;
    let mut stack: Vec<SymbolId> = c.stack.iter().rev().copied().collect();
    let mut configs = vec![c.clone()];
    let mut rules = Vec::new();
    for _ in 0..max_steps {
        match sampler.step(&mut state, &mut stack, &mut rng) {
            Some(r) => {
                rules.push(r);
                configs.push(config_of(state, &stack));
            }
            None => {
                return RunSample {
                    seed,
                    configs,
                    rules,
                    terminated: true,
                    truncated: false,
                }
            }
        }
    }
    let dead = match stack.last() {
        Some(&x) => ppda.is_stuck(Head::new(state, x)),
        None => true,
    };
    RunSample {
        seed,
        configs,
        rules,
        terminated: dead,
        truncated: !dead,
    }
}

/// Per-run seeds of a batch.
pub fn run_seeds(seed: u64, runs: usize) -> Vec<u64> {
    let mut master = SplitMix64::seed_from_u64(seed);
    (0..runs).map(|_| master.next_u64()).collect()
}

/// Frequency with standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub runs: usize,
    pub hits: usize,
    /// Runs whose outcome the horizon left open; never counted as hits.
    pub undetermined: usize,
    pub estimate: f64,
    pub stderr: f64,
}

impl Estimate {
    fn new(runs: usize, hits: usize, undetermined: usize) -> Self {
        let p = if runs == 0 { 0.0 } else { hits as f64 / runs as f64 };
        let stderr = if runs == 0 { 0.0 } else { (p * (1.0 - p) / runs as f64).sqrt() };
        Estimate {
            runs,
            hits,
            undetermined,
            estimate: p,
            stderr,
        }
    }

    /// Whether `[lo, hi]` meets the estimate widened by `sigmas` standard
    /// errors and by the undetermined fraction above.
    pub fn consistent_with(&self, lo: f64, hi: f64, sigmas: f64) -> bool {
        let slack = sigmas * self.stderr + 1e-12;
        let open = self.undetermined as f64 / self.runs.max(1) as f64;
        self.estimate - slack <= hi && lo <= self.estimate + open + slack
    }
}

/// Fraction of runs from `c` that reach `C₂` through `C₁` within `horizon` steps.
pub fn estimate_until(
    ppda: &Ppda,
    c1: &SimpleSet,
    c2: &SimpleSet,
    c: &Configuration,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Estimate {
    let sampler = Sampler::new(ppda);
    let member = |set: &SimpleSet, state: StateId, stack: &[SymbolId]| match stack.last() {
        Some(&x) => set.contains_head(Head::new(state, x)),
        None => set.contains_eps(state),
    };
    let (hits, undetermined) = run_seeds(seed, runs)
        .into_par_iter()
        .map(|s| {
            let (verdict, outcome, _) = sampler.walk(c, horizon, s, |state, stack| {
                if member(c2, state, stack) {
                    Some(true)
                } else if !member(c1, state, stack) {
                    Some(false)
                } else {
                    None
                }
            });
            (usize::from(verdict == Some(true)), usize::from(outcome == Outcome::Truncated))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Estimate::new(runs, hits, undetermined)
}

/// Outcome counts of footprints sampled against a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceEstimate {
    pub estimate: Estimate,
    pub rejected: usize,
    /// Consecutive footprint states with no chain edge between them.
    pub unsupported_steps: usize,
}

/// Fraction of runs from `c` whose certified footprint enters an accepting
/// bottom component of `chain` within `horizon` steps.
#[allow(clippy::too_many_arguments)]
pub fn estimate_acceptance(
    ppda: &Ppda,
    obs: &ObservingAutomaton,
    chain: &MinChain,
    classes: &BsccClassification,
    c: &Configuration,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> AcceptanceEstimate {
    let sampler = Sampler::new(ppda);
    let reach = PopReach::new(ppda);
    let accepting = classes.accepting_states();
    let rejecting = classes.rejecting_states();
    let (hits, rejected, open, unsupported) = run_seeds(seed, runs)
        .into_par_iter()
        .map(|s| {
            let mut heads = Vec::new();
            let mut lengths = Vec::new();
            let (_, outcome, last) = sampler.walk(c, horizon, s, |state, stack: &[SymbolId]| {
                heads.push(stack.last().map(|&x| Head::new(state, x)));
                lengths.push(stack.len());
                None::<()>
            });
            let terminated = outcome == Outcome::Terminated;
            let horizon = if terminated {
                Horizon::Complete
            } else {
                Horizon::Open {
                    floor: reach.floor(&last),
                }
            };
            let trail: Vec<Option<usize>> = footprint_of(obs, &heads, &lengths, terminated, horizon)
                .iter()
                .map(|s| chain.index_of(s))
                .collect();
            let unsupported = trail
                .windows(2)
                .filter(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) => chain.edge(a, b).is_none(),
                    _ => true,
                })
                .count();
            let verdict = trail.iter().flatten().find_map(|i| {
                if accepting.contains(i) {
                    Some(true)
                } else if rejecting.contains(i) {
                    Some(false)
                } else {
                    None
                }
            });
            match verdict {
                Some(true) => (1, 0, 0, unsupported),
                Some(false) => (0, 1, 0, unsupported),
                None => (0, 0, 1, unsupported),
            }
        })
        .reduce(|| (0, 0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));
    AcceptanceEstimate {
        estimate: Estimate::new(runs, hits, open),
        rejected,
        unsupported_steps: unsupported,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bernoulli;
    use crate::model::{parse_configuration, parse_ppda};
    use crate::rat;

    #[test]
    fn single_rule_runs_are_deterministic() {
        let sys = parse_ppda("pbpa alphabet A B; A -> 1 B; B -> 1 A;").unwrap();
        let c = parse_configuration(&sys, "A").unwrap();
        let r = sample_run(&sys, &c, 4, 7);
        let names: Vec<String> = r.configs.iter().map(|c| sys.display_config(c)).collect();
        assert_eq!(names, ["A", "B", "A", "B", "A"]);
        assert!(r.truncated && !r.terminated);
    }

    #[test]
    fn same_seed_same_run() {
        let walk = bernoulli(&rat(1, 2));
        let c = parse_configuration(&walk, "IZ").unwrap();
        assert_eq!(sample_run(&walk, &c, 200, 99), sample_run(&walk, &c, 200, 99));
        let long = sample_run(&walk, &c, 400, 99);
        let short = sample_run(&walk, &c, 200, 99);
        assert_eq!(long.configs[..short.configs.len()], short.configs[..]);
    }

    #[test]
    fn until_everything_and_nothing() {
        let walk = bernoulli(&rat(2, 3));
        let c = parse_configuration(&walk, "IIZ").unwrap();
        let all = SimpleSet::all(&walk);
        let sure = estimate_until(&walk, &all, &all, &c, 100, 10, 1);
        assert_eq!((sure.estimate, sure.undetermined), (1.0, 0));
        let never = estimate_until(&walk, &all, &SimpleSet::empty(), &c, 100, 10, 1);
        assert_eq!(never.estimate, 0.0);
    }

    #[test]
    fn until_matches_closed_form() {
        let walk = bernoulli(&rat(2, 3));
        let c = parse_configuration(&walk, "IIZ").unwrap();
        let z = SimpleSet::topped_by(&walk, walk.symbol_id("Z").unwrap());
        let e = estimate_until(&walk, &SimpleSet::all(&walk), &z, &c, 20_000, 1_000, 3);
        assert!(e.consistent_with(0.25, 0.25, 4.0), "{e:?}");
    }
}
