use std::path::{Path, PathBuf};
use std::sync::Arc;

use ppda::equations::{Polynomial, VarId};
use ppda::mc::{analyze, analyze_muller, bsccs, muller_product, Analysis, BsccClassification};
use ppda::model::{normalize, Configuration, Head, Ppda};
use ppda::omega::{build_min_chain, MinChain, ObservingAutomaton};
use ppda::pbpa::{tolerant_set, ApproxError};
use ppda::pctl::{check_qualitative, parse_formula, Formula, PctlError, RegularValuation};
use ppda::regsets::{ConfigSet, Definitions};
use ppda::sim::{estimate_acceptance, estimate_until, Estimate};
use ppda::solver::{export_smt, irun_probability, Backend, DecisionQuery, Oracle, UntilProblem, Verdict};
use ppda::{format_rational, Rational};
use serde_json::{json, Map, Value};

use crate::error::{undecided_analysis, CliError, Decided};
use crate::inputs::{self, simple_until, threshold_arg, Threshold};
use crate::output::{interval, rat, Report};
use crate::{Command, Global, PropertyFile};

pub enum Outcome {
    Report(Report),
    /// Text printed verbatim instead of a JSON document.
    Raw(String),
}

fn report(result: Value, summary: String) -> Outcome {
    Outcome::Report(Report {
        result,
        provenance: Map::new(),
        summary,
    })
}

pub fn run(command: &Command, global: &Global, oracle: &Oracle) -> Result<Outcome, CliError> {
    match command {
        Command::Validate {
            model,
            defs,
            observer,
            muller,
        } => validate(model, defs.as_deref(), observer.as_deref(), muller.as_deref()),
        Command::Until {
            model,
            defs,
            c1,
            c2,
            config,
            threshold,
            lambda,
        } => until(model, defs.as_deref(), c1, c2, config, threshold.as_ref(), lambda.as_ref(), global, oracle),
        Command::Irun { model, config } => irun(model, config, global),
        Command::Pctl {
            model,
            defs,
            formula,
            config,
        } => pctl(model, defs.as_deref(), formula, config, oracle),
        Command::PctlApprox {
            model,
            defs,
            formula,
            config,
            lambda,
        } => pctl_approx(model, defs.as_deref(), formula, config, lambda, oracle),
        Command::Omega {
            model,
            property,
            config,
            threshold,
        } => omega(model, property, config, threshold.as_ref(), global, oracle),
        Command::Chain { model, property, text } => chain(model, property, *text, global, oracle),
        Command::ExportSmt {
            model,
            defs,
            c1,
            c2,
            query,
            output,
            check,
        } => export(model, defs.as_deref(), c1, c2, query, output.as_deref(), *check, oracle),
        Command::Simulate {
            model,
            defs,
            config,
            c1,
            c2,
            observer,
            muller,
            runs,
            horizon,
            seed,
        } => {
            let sampling = Sampling {
                runs: *runs,
                horizon: *horizon,
                seed: *seed,
            };
            let property = match (observer, muller) {
                (Some(o), _) => Some(Property::Observer(o.clone())),
                (None, Some(m)) => Some(Property::Muller(m.clone())),
                (None, None) => None,
            };
            simulate(model, defs.as_deref(), config, c1, c2.as_deref(), property, sampling, global, oracle)
        }
    }
}

fn validate(model: &Path, defs: Option<&Path>, observer: Option<&Path>, muller: Option<&Path>) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let defs = inputs::load_definitions(&ppda, defs)?;
    let observer_states = observer
        .map(|p| inputs::load_observer(&ppda, p).map(|o| o.num_states()))
        .transpose()?;
    let muller_states = muller
        .map(|p| inputs::load_muller(&ppda, p).map(|m| m.num_states()))
        .transpose()?;
    let summary = format!(
        "{} control states, {} symbols, {} rules",
        ppda.num_states(),
        ppda.num_symbols(),
        ppda.rules().len()
    );
    let result = json!({
        "states": ppda.state_names(),
        "symbols": ppda.symbol_names(),
        "rules": ppda.rules().len(),
        "stateless": ppda.stateless_syntax(),
        "normalized": ppda.is_normalized(),
        "sets": defs.order,
        "observer_states": observer_states,
        "muller_states": muller_states,
    });
    Ok(report(result, summary))
}

fn verdict_json(verdict: Verdict, decided_by: Option<Backend>) -> Value {
    json!({
        "verdict": verdict.to_string(),
        "decided_by": decided_by.map(|b| b.to_string()),
    })
}

fn threshold_json(t: &Threshold, verdict: Verdict, decided_by: Option<Backend>) -> Value {
    let mut v = verdict_json(verdict, decided_by);
    v["relation"] = json!(t.rel.symbol());
    v["bound"] = rat(&t.bound);
    v
}

fn load_sets(ppda: &Ppda, defs: Option<&Path>, c1: &str, c2: &str) -> Result<(ConfigSet, ConfigSet), CliError> {
    let defs = inputs::load_definitions(ppda, defs)?;
    Ok((inputs::set(ppda, c1, &defs)?, inputs::set(ppda, c2, &defs)?))
}

#[allow(clippy::too_many_arguments)]
fn until(
    model: &Path,
    defs: Option<&Path>,
    c1: &str,
    c2: &str,
    config: &str,
    threshold: Option<&Threshold>,
    lambda: Option<&Rational>,
    global: &Global,
    oracle: &Oracle,
) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let (s1, s2) = load_sets(&ppda, defs, c1, c2)?;
    let c = inputs::config(&ppda, config)?;
    let problem = simple_until(&ppda, &s1, &s2, c.clone())?;
    let until = UntilProblem::new(&problem.ppda, &problem.c1, &problem.c2)?;
    let bracket = until.probability(&problem.start, &global.width)?;
    let mut summary = format!(
        "P({}, {c1} U {c2}) in {}",
        ppda.display_config(&c),
        bracket.interval
    );
    let mut result = json!({
        "config": ppda.display_config(&c),
        "c1": c1,
        "c2": c2,
        "interval": interval(&bracket.interval),
        "width": rat(&global.width),
        "width_met": bracket.width_met,
        "reduced": problem.reduced,
    });
    let mut provenance = Map::new();
    if let Some(t) = threshold {
        let answer = until.compare(&problem.start, t.rel, &t.bound, oracle)?;
        result["threshold"] = threshold_json(t, answer.verdict, Some(answer.decided_by));
        summary += &format!("; {} {}: {}", t.rel, format_rational(&t.bound), answer.verdict);
    }
    if let Some(lambda) = lambda {
        let b = until.bisect(&problem.start, lambda, oracle)?;
        result["bisection"] = json!({
            "lambda": rat(lambda),
            "interval": interval(&b.interval),
        });
        provenance.insert("bisection_rounds".into(), json!(b.rounds));
        provenance.insert("bisection_fallbacks".into(), json!(b.fallbacks));
        summary += &format!("; bisection {}", b.interval);
    }
    Ok(Outcome::Report(Report {
        result,
        provenance,
        summary,
    }))
}

fn irun(model: &Path, config: &str, global: &Global) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let c = inputs::config(&ppda, config)?;
    let b = irun_probability(&ppda, &c, &global.width)?;
    let result = json!({
        "config": ppda.display_config(&c),
        "interval": interval(&b.interval),
        "width": rat(&global.width),
        "width_met": b.width_met,
    });
    Ok(report(result, format!("P({} never empties the stack) in {}", ppda.display_config(&c), b.interval)))
}

fn formula_and_valuation(ppda: &Ppda, defs: Option<&Path>, text: &str) -> Result<(Formula, RegularValuation), CliError> {
    let defs: Definitions = inputs::load_definitions(ppda, defs)?;
    let f = parse_formula(text).map_err(|e| CliError::parse(None, "formula", e))?;
    let mut valuation = RegularValuation::from_definitions(ppda, &defs);
    valuation.complete(ppda, &f)?;
    Ok((f, valuation))
}

fn configs(ppda: &Ppda, texts: &[String]) -> Result<Vec<Configuration>, CliError> {
    texts.iter().map(|t| inputs::config(ppda, t)).collect()
}

fn pctl(model: &Path, defs: Option<&Path>, formula: &str, config: &[String], oracle: &Oracle) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let (f, valuation) = formula_and_valuation(&ppda, defs, formula)?;
    let cs = configs(&ppda, config)?;
    let (verdicts, reason): (Vec<Verdict>, Option<String>) = match check_qualitative(&ppda, &f, &valuation, oracle) {
        Ok(sat) => (cs.iter().map(|c| Verdict::from(sat.accepts(c))).collect(), None),
        Err(PctlError::Undecided(m)) => (vec![Verdict::Unknown; cs.len()], Some(m)),
        Err(e) => return Err(e.into()),
    };
    let results: Vec<Value> = cs
        .iter()
        .zip(&verdicts)
        .map(|(c, v)| json!({ "config": ppda.display_config(c), "verdict": v.to_string() }))
        .collect();
    let summary = cs
        .iter()
        .zip(&verdicts)
        .map(|(c, v)| format!("{}: {v}", ppda.display_config(c)))
        .collect::<Vec<_>>()
        .join(", ");
    let result = json!({ "formula": f.to_string(), "results": results, "reason": reason });
    Ok(report(result, summary))
}

fn pctl_approx(
    model: &Path,
    defs: Option<&Path>,
    formula: &str,
    config: &[String],
    lambda: &Rational,
    oracle: &Oracle,
) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let (f, valuation) = formula_and_valuation(&ppda, defs, formula)?;
    let cs = configs(&ppda, config)?;
    let undecided = |reason: String| {
        let results: Vec<Value> = cs
            .iter()
            .map(|c| json!({ "config": ppda.display_config(c), "answer": "unknown" }))
            .collect();
        let result = json!({
            "formula": f.to_string(),
            "lambda": rat(lambda),
            "results": results,
            "nodes": [],
            "reason": reason,
        });
        Ok(report(result, "unknown".into()))
    };
    let (set, nodes) = match tolerant_set(&ppda, &f, &valuation, lambda, oracle) {
        Ok(x) => x,
        Err(ApproxError::Undecided(m) | ApproxError::Pctl(PctlError::Undecided(m))) => return undecided(m),
        Err(e) => return Err(e.into()),
    };
    let answers: Vec<(String, &str)> = cs
        .iter()
        .map(|c| (ppda.display_config(c), if set.accepts(c) { "YES" } else { "NO" }))
        .collect();
    let results: Vec<Value> = answers.iter().map(|(c, a)| json!({ "config": c, "answer": a })).collect();
    let nodes: Vec<Value> = nodes
        .iter()
        .map(|n| {
            json!({
                "bound": n.bound.to_string(),
                "n": n.n,
                "kappa": rat(&n.kappa),
                "nu": rat(&n.nu),
                "s_size": n.s_size,
                "g_size": n.g_size,
            })
        })
        .collect();
    let summary = answers.iter().map(|(c, a)| format!("{c}: {a}")).collect::<Vec<_>>().join(", ");
    let result = json!({
        "formula": f.to_string(),
        "lambda": rat(lambda),
        "results": results,
        "nodes": nodes,
        "reason": Value::Null,
    });
    Ok(report(result, summary))
}

#[derive(Clone, Debug)]
enum Property {
    Observer(PathBuf),
    Muller(PathBuf),
}

impl Property {
    fn from_file(p: &PropertyFile) -> Self {
        match (&p.observer, &p.muller) {
            (Some(o), _) => Property::Observer(o.clone()),
            (None, Some(m)) => Property::Muller(m.clone()),
            (None, None) => unreachable!("clap requires one of the two"),
        }
    }

    fn describe(&self) -> Value {
        let (kind, path) = match self {
            Property::Observer(p) => ("observer", p),
            Property::Muller(p) => ("muller", p),
        };
        json!({ "kind": kind, "file": path.display().to_string() })
    }

    fn analyze(&self, ppda: &Ppda, c: &Configuration, width: &Rational, oracle: &Oracle) -> Result<Decided<Analysis>, CliError> {
        match self {
            Property::Observer(p) => undecided_analysis(analyze(ppda, &inputs::load_observer(ppda, p)?, c, width, oracle)),
            Property::Muller(p) => undecided_analysis(analyze_muller(ppda, &inputs::load_muller(ppda, p)?, c, width, oracle)),
        }
    }
}

fn components_json(chain: &MinChain, classes: &BsccClassification, ppda: &Ppda, obs: &ObservingAutomaton) -> Value {
    classes
        .components
        .iter()
        .zip(&classes.accepting)
        .map(|(members, &accepting)| {
            let states: Vec<String> = members.iter().map(|&i| chain.state(i).label(ppda, obs)).collect();
            json!({ "states": states, "accepting": accepting })
        })
        .collect()
}

fn omega(
    model: &Path,
    property: &PropertyFile,
    config: &str,
    threshold: Option<&Threshold>,
    global: &Global,
    oracle: &Oracle,
) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let c = inputs::config(&ppda, config)?;
    let property = Property::from_file(property);
    let shown = ppda.display_config(&c);
    let a = match property.analyze(&ppda, &c, &global.width, oracle)? {
        Decided::Known(a) => a,
        Decided::Unknown(reason) => {
            let mut result = json!({
                "config": shown,
                "property": property.describe(),
                "interval": Value::Null,
                "reason": reason,
            });
            if let Some(t) = threshold {
                result["threshold"] = threshold_json(t, Verdict::Unknown, None);
            }
            return Ok(report(result, "unknown".into()));
        }
    };
    let r = &a.report;
    let mut summary = format!("P({shown} accepted) in {}", r.interval);
    let mut result = json!({
        "config": shown,
        "property": property.describe(),
        "interval": interval(&r.interval),
        "width": rat(&global.width),
        "width_met": r.width_met,
        "entry": r.chain.state(r.entry).label(&a.system, &a.observer),
        "chain_states": r.chain.len(),
        "components": components_json(&r.chain, &r.classification, &a.system, &a.observer),
        "reason": Value::Null,
    });
    if let Some(t) = threshold {
        let verdict = t.rel.decide_on(&r.interval, &t.bound);
        result["threshold"] = threshold_json(t, verdict, None);
        summary += &format!("; {} {}: {verdict}", t.rel, format_rational(&t.bound));
    }
    Ok(report(result, summary))
}

fn chain(model: &Path, property: &PropertyFile, text: bool, global: &Global, oracle: &Oracle) -> Result<Outcome, CliError> {
    let original = inputs::load_model(model)?;
    let ppda = normalize(&original).ppda;
    let (system, obs) = match Property::from_file(property) {
        Property::Observer(p) => {
            let obs = inputs::load_observer(&original, &p)?;
            let lifted = obs.lift(ppda.num_states(), ppda.num_symbols());
            (ppda, lifted)
        }
        Property::Muller(p) => {
            let m = inputs::load_muller(&original, &p)?;
            muller_product(&ppda, &m.lift(ppda.num_states(), ppda.num_symbols()))?
        }
    };
    let chain = build_min_chain(&system, &obs, &global.width, oracle)?;
    if text {
        return Ok(Outcome::Raw(chain.render(&system, &obs)));
    }
    let classes = bsccs(&chain, &obs);
    let states: Vec<Value> = (0..chain.len())
        .map(|i| {
            let edges: Vec<Value> = chain
                .edges(i)
                .iter()
                .map(|e| json!({ "target": e.target, "probability": interval(&e.prob) }))
                .collect();
            json!({
                "index": i,
                "label": chain.state(i).label(&system, &obs),
                "edges": edges,
                "sums_to_one": chain.sums_bracket_one(i),
            })
        })
        .collect();
    let irun: Vec<Value> = system
        .heads()
        .filter_map(|h: Head| {
            chain
                .irun(h)
                .map(|x| json!({ "head": system.display_head(h), "interval": interval(x) }))
        })
        .collect();
    let summary = format!(
        "{} states, {} bottom components, {} accepting",
        chain.len(),
        classes.components.len(),
        classes.accepting.iter().filter(|&&a| a).count()
    );
    let result = json!({
        "states": states,
        "components": components_json(&chain, &classes, &system, &obs),
        "irun": irun,
        "edge_width": rat(chain.component_width()),
    });
    Ok(report(result, summary))
}

/// Left side of an exported comparison.
fn query_term(problem: &UntilProblem, ppda: &Ppda, term: &str) -> Result<Polynomial, CliError> {
    let term = term.trim();
    if let Some(inner) = term.strip_prefix("P(").and_then(|t| t.strip_suffix(')')) {
        return Ok(problem.expression(&inputs::config(ppda, inner)?)?);
    }
    let bad = || CliError::input(format!("cannot read `{term}` as a variable; expected X.eps, X.bullet, p.X.q or p.X.bullet"));
    let parts: Vec<&str> = term.split('.').map(str::trim).collect();
    let (state, symbol, target) = match parts.as_slice() {
        [x, t] if ppda.num_states() == 1 => (ppda.state_names()[0].as_str(), *x, *t),
        [p, x, t] => (*p, *x, *t),
        _ => return Err(bad()),
    };
    let p = ppda.state_id(state).ok_or_else(bad)?;
    let head = Head::new(p, ppda.symbol_id(symbol).ok_or_else(bad)?);
    let var = match target {
        "bullet" | "•" => VarId::bullet(head),
        "eps" | "ε" if ppda.num_states() == 1 => VarId::pop_to(head, p),
        q => VarId::pop_to(head, ppda.state_id(q).ok_or_else(bad)?),
    };
    let sys = problem.solver().system();
    let i = sys.var_index(var).ok_or_else(bad)?;
    Ok(match sys.pinned().get(&i) {
        Some(k) => Polynomial::constant(k.clone()),
        None => Polynomial::var(i),
    })
}

#[allow(clippy::too_many_arguments)]
fn export(
    model: &Path,
    defs: Option<&Path>,
    c1: &str,
    c2: &str,
    query: &str,
    output: Option<&Path>,
    check: bool,
    oracle: &Oracle,
) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let (s1, s2) = load_sets(&ppda, defs, c1, c2)?;
    let (Some(s1), Some(s2)) = (s1.as_simple(), s2.as_simple()) else {
        return Err(CliError::input("exported queries need sets decided by the head"));
    };
    let split = query
        .find(['<', '>', '='])
        .ok_or_else(|| CliError::input(format!("query `{query}` has no relation")))?;
    let threshold = threshold_arg(&query[split..]).map_err(CliError::input)?;
    let problem = UntilProblem::new(&ppda, &s1, &s2)?;
    let lhs = query_term(&problem, &ppda, &query[..split])?;
    let q = DecisionQuery::new(Arc::clone(problem.solver()), lhs, threshold.rel, threshold.bound.clone());
    let script = export_smt(&q);
    let mut result = json!({
        "query": query,
        "c1": c1,
        "c2": c2,
        "variables": problem.solver().system().free_vars().count(),
    });
    match output {
        Some(path) => {
            std::fs::write(path, &script).map_err(|e| CliError::Input {
                source_name: Some(path.to_path_buf()),
                line_col: None,
                message: e.to_string(),
            })?;
            result["file"] = json!(path.display().to_string());
        }
        None => result["script"] = json!(script),
    }
    let mut summary = format!("{} lines of SMT-LIB", script.lines().count());
    if check {
        let external = Oracle::new(Backend::External)
            .with_solver(oracle.solver.clone())
            .with_timeout(oracle.timeout);
        let answer = external.decide(&q)?;
        result["check"] = verdict_json(answer.verdict, Some(answer.decided_by));
        summary += &format!("; solver says {}", answer.verdict);
        let mut provenance = Map::new();
        provenance.insert("check_external_calls".into(), json!(external.stats.snapshot().1));
        return Ok(Outcome::Report(Report {
            result,
            provenance,
            summary,
        }));
    }
    Ok(report(result, summary))
}

#[derive(Clone, Copy, Debug)]
struct Sampling {
    runs: usize,
    horizon: usize,
    seed: u64,
}

fn estimate_json(e: &Estimate) -> Value {
    const GRID: i64 = 1_000_000_000;
    let estimate = if e.runs == 0 {
        Rational::from_integer(0.into())
    } else {
        Rational::new(e.hits.into(), e.runs.into())
    };
    // Rounded up so the reported bound never understates the error.
    let stderr = Rational::new(((e.stderr * GRID as f64).ceil() as i64).into(), GRID.into());
    json!({
        "runs": e.runs,
        "hits": e.hits,
        "undetermined": e.undetermined,
        "estimate": rat(&estimate),
        "stderr_bound": rat(&stderr),
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    model: &Path,
    defs: Option<&Path>,
    config: &str,
    c1: &str,
    c2: Option<&str>,
    property: Option<Property>,
    s: Sampling,
    global: &Global,
    oracle: &Oracle,
) -> Result<Outcome, CliError> {
    let ppda = inputs::load_model(model)?;
    let c = inputs::config(&ppda, config)?;
    let shown = ppda.display_config(&c);
    let sampling = json!({ "runs": s.runs, "horizon": s.horizon, "seed": s.seed });
    if let Some(property) = property {
        let a = match property.analyze(&ppda, &c, &global.width, oracle)? {
            Decided::Known(a) => a,
            Decided::Unknown(reason) => return Err(CliError::Internal(reason)),
        };
        let r = &a.report;
        let e = estimate_acceptance(
            &a.system,
            &a.observer,
            &r.chain,
            &r.classification,
            &a.start,
            s.runs,
            s.horizon,
            s.seed,
        );
        let mut result = estimate_json(&e.estimate);
        result["config"] = json!(shown);
        result["property"] = property.describe();
        result["rejected"] = json!(e.rejected);
        result["unsupported_steps"] = json!(e.unsupported_steps);
        result["certified"] = interval(&r.interval);
        result["sampling"] = sampling;
        let summary = format!(
            "{} of {} runs accepted, {} undetermined; certified {}",
            e.estimate.hits, e.estimate.runs, e.estimate.undetermined, r.interval
        );
        return Ok(report(result, summary));
    }
    let c2 = c2.ok_or_else(|| CliError::input("simulate needs --c2, --observer or --muller"))?;
    let (s1, s2) = load_sets(&ppda, defs, c1, c2)?;
    let problem = simple_until(&ppda, &s1, &s2, c)?;
    let e = estimate_until(&problem.ppda, &problem.c1, &problem.c2, &problem.start, s.runs, s.horizon, s.seed);
    let mut result = estimate_json(&e);
    result["config"] = json!(shown);
    result["c1"] = json!(c1);
    result["c2"] = json!(c2);
    result["sampling"] = sampling;
    let summary = format!("{} of {} runs hit, {} undetermined", e.hits, e.runs, e.undetermined);
    Ok(report(result, summary))
}
