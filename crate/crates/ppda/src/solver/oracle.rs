use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};

use super::system::{Method, SystemSolver};
use super::{Interval, SolverError};
use crate::equations::{MonotoneSystem, Polynomial};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    pub fn holds(self, a: &Rational, b: &Rational) -> bool {
        match self {
            Relation::Lt => a < b,
            Relation::Le => a <= b,
            Relation::Eq => a == b,
            Relation::Ge => a >= b,
            Relation::Gt => a > b,
        }
    }

    /// `¬(a R b)` as `a R' b`; `None` for equality.
    pub fn negate(self) -> Option<Relation> {
        Some(match self {
            Relation::Lt => Relation::Ge,
            Relation::Le => Relation::Gt,
            Relation::Ge => Relation::Lt,
            Relation::Gt => Relation::Le,
            Relation::Eq => return None,
        })
    }

    /// `a R b` as `b R' a`.
    pub fn flip(self) -> Relation {
        match self {
            Relation::Lt => Relation::Gt,
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
            Relation::Gt => Relation::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    /// Decides `x R bound` for every `x` in the bracket, if possible.
    pub fn decide_on(self, x: &Interval, bound: &Rational) -> Verdict {
        let (lo, hi) = (x.lo(), x.hi());
        let verdict = match self {
            Relation::Lt if hi < bound => Some(true),
            Relation::Lt if lo >= bound => Some(false),
            Relation::Le if hi <= bound => Some(true),
            Relation::Le if lo > bound => Some(false),
            Relation::Ge if lo >= bound => Some(true),
            Relation::Ge if hi < bound => Some(false),
            Relation::Gt if lo > bound => Some(true),
            Relation::Gt if hi <= bound => Some(false),
            Relation::Eq if lo > bound || hi < bound => Some(false),
            Relation::Eq if lo == bound && hi == bound => Some(true),
            _ => None,
        };
        verdict.into()
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => Relation::Lt,
            "<=" | "≤" => Relation::Le,
            "=" | "==" => Relation::Eq,
            ">=" | "≥" => Relation::Ge,
            ">" => Relation::Gt,
            other => return Err(format!("unknown relation `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl From<Option<bool>> for Verdict {
    fn from(b: Option<bool>) -> Self {
        match b {
            Some(true) => Verdict::True,
            Some(false) => Verdict::False,
            None => Verdict::Unknown,
        }
    }
}

impl Verdict {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Verdict::True => Some(true),
            Verdict::False => Some(false),
            Verdict::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != Verdict::Unknown
    }
}

impl From<bool> for Verdict {
    fn from(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Unknown => "unknown",
        })
    }
}

/// Which decision procedures the oracle may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    /// Iterative brackets, then component-wise solving, then the external solver.
    #[default]
    Auto,
    /// Iterative brackets only; undecided when the bracket straddles the bound.
    Intervals,
    /// Component-wise solving, exact for one-variable and affine components.
    Exact,
    /// The external SMT solver only.
    External,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "auto" => Backend::Auto,
            "intervals" => Backend::Intervals,
            "exact" => Backend::Exact,
            "external" => Backend::External,
            other => return Err(format!("unknown backend `{other}`")),
        })
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Auto => "auto",
            Backend::Intervals => "intervals",
            Backend::Exact => "exact",
            Backend::External => "external",
        })
    }
}

/// `lhs rel rhs` about the least solution of a system.
#[derive(Clone, Debug)]
pub struct DecisionQuery {
    pub solver: Arc<SystemSolver>,
    pub lhs: Polynomial,
    pub rel: Relation,
    pub rhs: Polynomial,
}

/// Query in the form `expr rel bound` with `expr` having nonnegative coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotoneQuery {
    pub expr: Polynomial,
    pub rel: Relation,
    pub bound: Rational,
}

impl DecisionQuery {
    pub fn new(solver: Arc<SystemSolver>, expr: Polynomial, rel: Relation, bound: Rational) -> Self {
        DecisionQuery {
            solver,
            lhs: expr,
            rel,
            rhs: Polynomial::constant(bound),
        }
    }

    pub fn compare(solver: Arc<SystemSolver>, lhs: Polynomial, rel: Relation, rhs: Polynomial) -> Self {
        DecisionQuery { solver, lhs, rel, rhs }
    }

    fn substituted(&self, p: &Polynomial) -> Polynomial {
        let sys = self.solver.system();
        p.substitute(&|v| sys.pinned().get(&v).map(|c| Polynomial::constant(c.clone())))
    }

    /// Moves everything to one side when that leaves nonnegative coefficients.
    pub fn monotone_form(&self) -> Option<MonotoneQuery> {
        let diff = self.substituted(&self.lhs).sub(&self.substituted(&self.rhs));
        let k = diff.constant_term();
        let vars = diff.sub(&Polynomial::constant(k.clone()));
        if vars.terms().all(|(_, c)| c.is_positive()) {
            return Some(MonotoneQuery {
                expr: vars,
                rel: self.rel,
                bound: -k,
            });
        }
        let neg = vars.scale(&-Rational::one());
        if neg.terms().all(|(_, c)| c.is_positive()) {
            return Some(MonotoneQuery {
                expr: neg,
                rel: self.rel.flip(),
                bound: k,
            });
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evidence {
    /// Bracket of the query's left side minus right side, or of the monotone expression.
    Bracket(Interval),
    /// Raw `check-sat` answers of the external solver.
    Solver(Vec<String>),
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleAnswer {
    pub verdict: Verdict,
    pub evidence: Evidence,
    /// Procedure that produced the verdict.
    pub decided_by: Backend,
}

/// External solver invocation: the script goes to standard input, or to a
/// temporary file substituted for a `{}` argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverCommand {
    argv: Vec<String>,
}

impl SolverCommand {
    pub fn parse(cmd: &str) -> Option<Self> {
        let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        (!argv.is_empty()).then_some(SolverCommand { argv })
    }

    /// `PPDA_SOLVER` if set, else `z3 -in` when `z3` is on the path.
    pub fn from_env() -> Option<Self> {
        if let Ok(cmd) = std::env::var("PPDA_SOLVER") {
            return Self::parse(&cmd);
        }
        let path = std::env::var_os("PATH")?;
        std::env::split_paths(&path)
            .any(|dir| dir.join("z3").is_file())
            .then(|| SolverCommand {
                argv: vec!["z3".into(), "-in".into()],
            })
    }

    pub fn argv(&self) -> &[String] {
        &self.argv
    }

    /// Runs the script; returns the non-empty output lines.
    pub fn run(&self, script: &str, timeout: Duration) -> Result<Vec<String>, SolverError> {
        static COUNTER: AtomicUsize = AtomicUsize::new(0);
        let uses_file = self.argv.iter().any(|a| a.contains("{}"));
        let file = uses_file.then(|| {
            let n = COUNTER.fetch_add(1, Ordering::Relaxed);
            std::env::temp_dir().join(format!("ppda-{}-{n}.smt2", std::process::id()))
        });
        if let Some(path) = &file {
            std::fs::write(path, script).map_err(|e| SolverError::Process(e.to_string()))?;
        }
        let args: Vec<String> = self.argv[1..]
            .iter()
            .map(|a| match &file {
                Some(path) => a.replace("{}", &path.to_string_lossy()),
                None => a.clone(),
            })
            .collect();
        let result = self.spawn(&args, (!uses_file).then_some(script), timeout);
        if let Some(path) = &file {
            let _ = std::fs::remove_file(path);
        }
        result
    }

    fn spawn(&self, args: &[String], stdin: Option<&str>, timeout: Duration) -> Result<Vec<String>, SolverError> {
        let mut child = Command::new(&self.argv[0])
            .args(args)
            .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Process(format!("cannot start `{}`: {e}", self.argv[0])))?;
        if let Some(script) = stdin {
            let mut pipe = child.stdin.take().expect("piped stdin");
            pipe.write_all(script.as_bytes())
                .map_err(|e| SolverError::Process(e.to_string()))?;
        }
        let mut out = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = out.read_to_string(&mut s);
            s
        });
        let deadline = Instant::now() + timeout;
        loop {
            match child.try_wait().map_err(|e| SolverError::Process(e.to_string()))? {
                Some(_) => break,
                None if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(SolverError::Timeout);
                }
                None => std::thread::sleep(Duration::from_millis(2)),
            }
        }
        let text = reader.join().unwrap_or_default();
        Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
    }
}

/// Counters describing the work an oracle has done.
#[derive(Debug, Default)]
pub struct OracleStats {
    pub queries: AtomicUsize,
    pub external_calls: AtomicUsize,
    pub refinements: AtomicUsize,
}

impl OracleStats {
    pub fn snapshot(&self) -> (usize, usize, usize) {
        (
            self.queries.load(Ordering::Relaxed),
            self.external_calls.load(Ordering::Relaxed),
            self.refinements.load(Ordering::Relaxed),
        )
    }
}

/// Decides comparisons about least solutions.
#[derive(Debug)]
pub struct Oracle {
    pub backend: Backend,
    pub solver: Option<SolverCommand>,
    pub timeout: Duration,
    /// Finest bracket width tried before giving up on separation.
    pub finest_width: Rational,
    pub stats: OracleStats,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle::new(Backend::Auto)
    }
}

impl Oracle {
    /// Uses the solver from [`SolverCommand::from_env`] when one is available.
    pub fn new(backend: Backend) -> Self {
        Oracle {
            backend,
            solver: SolverCommand::from_env(),
            timeout: Duration::from_secs(60),
            finest_width: Rational::new(1.into(), num_bigint::BigInt::one() << 40),
            stats: OracleStats::default(),
        }
    }

    pub fn with_solver(mut self, solver: Option<SolverCommand>) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn decide(&self, q: &DecisionQuery) -> Result<OracleAnswer, SolverError> {
        self.stats.queries.fetch_add(1, Ordering::Relaxed);
        let steps: &[Backend] = match self.backend {
            Backend::Auto => &[Backend::Intervals, Backend::Exact, Backend::External],
            Backend::Intervals => &[Backend::Intervals],
            Backend::Exact => &[Backend::Exact],
            Backend::External => &[Backend::External],
        };
        let mut last = OracleAnswer {
            verdict: Verdict::Unknown,
            evidence: Evidence::None,
            decided_by: self.backend,
        };
        for &step in steps {
            let answer = match step {
                Backend::Intervals => self.by_brackets(q, Method::Iterative),
                Backend::Exact => self.by_brackets(q, Method::Decomposed),
                Backend::External => match &self.solver {
                    Some(cmd) => match self.by_solver(q, cmd) {
                        Ok(a) => a,
                        Err(e) if self.backend == Backend::External => return Err(e),
                        Err(_) => continue,
                    },
                    None if self.backend == Backend::External => {
                        return Err(SolverError::Process("no external solver configured".into()))
                    }
                    None => continue,
                },
                Backend::Auto => unreachable!(),
            };
            if answer.verdict.is_known() {
                return Ok(answer);
            }
            if !matches!(answer.evidence, Evidence::None) {
                last = answer;
            }
        }
        Ok(last)
    }

    fn by_brackets(&self, q: &DecisionQuery, method: Method) -> OracleAnswer {
        let decided_by = match method {
            Method::Iterative => Backend::Intervals,
            Method::Decomposed => Backend::Exact,
        };
        let (expr, rel, bound) = match q.monotone_form() {
            Some(m) => (m.expr, m.rel, m.bound),
            None => (q.lhs.sub(&q.rhs), q.rel, Rational::zero()),
        };
        let monotone = q.monotone_form().is_some();
        let mut width = Rational::new(1.into(), 256.into());
        loop {
            let b = q.solver.brackets(method, &width);
            let x = q.solver.eval_interval(&expr, &b);
            // Brackets certify the least solution only through monotone expressions.
            let verdict = if monotone || x.is_point() {
                rel.decide_on(&x, &bound)
            } else {
                Verdict::Unknown
            };
            if verdict.is_known() || width <= self.finest_width || (!monotone && !b.is_exact()) {
                return OracleAnswer {
                    verdict,
                    evidence: Evidence::Bracket(x),
                    decided_by,
                };
            }
            let achieved = b.max_width();
            if achieved > width {
                // The budget is exhausted; finer targets will not help.
                return OracleAnswer {
                    verdict,
                    evidence: Evidence::Bracket(x),
                    decided_by,
                };
            }
            self.stats.refinements.fetch_add(1, Ordering::Relaxed);
            width = width.clone() * width.clone();
        }
    }

    fn by_solver(&self, q: &DecisionQuery, cmd: &SolverCommand) -> Result<OracleAnswer, SolverError> {
        self.stats.external_calls.fetch_add(1, Ordering::Relaxed);
        let script = export_smt(q);
        let answers = cmd.run(&script, self.timeout)?;
        let check: Vec<&str> = answers
            .iter()
            .map(String::as_str)
            .filter(|l| matches!(*l, "sat" | "unsat" | "unknown"))
            .collect();
        let sat = |k: usize| match check.get(k) {
            Some(&"sat") => Some(true),
            Some(&"unsat") => Some(false),
            _ => None,
        };
        let verdict = match q.monotone_form() {
            Some(m) => match m.rel {
                Relation::Lt | Relation::Le => sat(0),
                Relation::Ge | Relation::Gt => sat(0).map(|s| !s),
                Relation::Eq => match (sat(0), sat(1)) {
                    (Some(false), _) | (_, Some(true)) => Some(false),
                    (Some(true), Some(false)) => Some(true),
                    _ => None,
                },
            },
            None => sat(0),
        };
        Ok(OracleAnswer {
            verdict: verdict.into(),
            evidence: Evidence::Solver(answers),
            decided_by: Backend::External,
        })
    }
}

fn smt_rational(r: &Rational) -> String {
    let body = if r.denom().is_one() {
        format!("{}.0", r.numer().abs())
    } else {
        format!("(/ {}.0 {}.0)", r.numer().abs(), r.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn smt_poly(p: &Polynomial, var: &dyn Fn(usize) -> String) -> String {
    let terms: Vec<String> = p
        .terms()
        .map(|(m, c)| {
            if m.is_empty() {
                return smt_rational(c);
            }
            let mut factors: Vec<String> = Vec::new();
            if !c.is_one() {
                factors.push(smt_rational(c));
            }
            factors.extend(m.iter().map(|&v| var(v as usize)));
            if factors.len() == 1 {
                factors.pop().expect("one factor")
            } else {
                format!("(* {})", factors.join(" "))
            }
        })
        .collect();
    match terms.len() {
        0 => "0.0".to_string(),
        1 => terms.into_iter().next().expect("one term"),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

/// Free variables reachable from `roots` through right-hand sides. The
/// least solution restricted to such a closed set is the least solution of
/// the restricted system, so scripts only mention these.
fn cone(sys: &MonotoneSystem, roots: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = roots.into_iter().collect();
    while let Some(i) = stack.pop() {
        if sys.is_pinned(i) || !seen.insert(i) {
            continue;
        }
        stack.extend(sys.dependencies(i));
    }
    seen
}

/// Post-fixed constraints `min(1, F(x)) ≤ x` over `vars`.
fn post_fixed_block(out: &mut String, sys: &MonotoneSystem, vars: &BTreeSet<usize>, var: &dyn Fn(usize) -> String) {
    for &i in vars {
        let x = var(i);
        let _ = writeln!(out, "(assert (and (<= 0.0 {x}) (<= {x} 1.0)))");
    }
    for &i in vars {
        let x = var(i);
        let _ = writeln!(out, "(assert (or (= {x} 1.0) (<= {} {x})))", smt_poly(sys.rhs(i), var));
    }
}

/// SMT-LIB2 script deciding the query through post-fixed certificates.
///
/// For `expr < b` and `expr ≤ b` the script is satisfiable iff the relation
/// holds at the least solution; `≥` and `>` ask for the negated strict or
/// non-strict form and hold iff the answer is `unsat`; `=` checks `≤` and
/// then `<` in two scopes. Queries that are not monotone in any arrangement
/// assert the least solution directly through a quantified minimality
/// constraint.
pub fn export_smt(q: &DecisionQuery) -> String {
    let sys = q.solver.system();
    let var = |i: usize| format!("x{i}");
    let mut out = String::new();
    let roots = q.lhs.variables().chain(q.rhs.variables());
    let vars = cone(sys, roots);
    let header = |out: &mut String, logic: &str| {
        let _ = writeln!(out, "(set-logic {logic})");
        for &i in &vars {
            let _ = writeln!(out, "; x{i} = {}", sys.name(i));
        }
        for &i in &vars {
            let _ = writeln!(out, "(declare-const x{i} Real)");
        }
    };
    match q.monotone_form() {
        Some(m) => {
            header(&mut out, "QF_NRA");
            post_fixed_block(&mut out, sys, &vars, &var);
            let e = smt_poly(&m.expr, &var);
            let b = smt_rational(&m.bound);
            let one_sided = |strict: bool| format!("(assert ({} {e} {b}))", if strict { "<" } else { "<=" });
            match m.rel {
                Relation::Lt | Relation::Ge => {
                    let _ = writeln!(out, "{}\n(check-sat)", one_sided(true));
                }
                Relation::Le | Relation::Gt => {
                    let _ = writeln!(out, "{}\n(check-sat)", one_sided(false));
                }
                Relation::Eq => {
                    let _ = writeln!(
                        out,
                        "(push 1)\n{}\n(check-sat)\n(pop 1)\n(push 1)\n{}\n(check-sat)\n(pop 1)",
                        one_sided(false),
                        one_sided(true)
                    );
                }
            }
        }
        None => {
            header(&mut out, "NRA");
            for i in vars.iter().copied() {
                let x = var(i);
                let f = smt_poly(sys.rhs(i), &var);
                let _ = writeln!(out, "(assert (and (<= 0.0 {x}) (<= {x} 1.0)))");
                let _ = writeln!(out, "(assert (= {x} (ite (<= 1.0 {f}) 1.0 {f})))");
            }
            let yvar = |i: usize| format!("y{i}");
            let binders: Vec<String> = vars.iter().copied().map(|i| format!("({} Real)", yvar(i))).collect();
            let mut premises = Vec::new();
            let mut below = Vec::new();
            for i in vars.iter().copied() {
                let y = yvar(i);
                premises.push(format!("(<= 0.0 {y}) (<= {y} 1.0)"));
                premises.push(format!("(or (= {y} 1.0) (<= {} {y}))", smt_poly(sys.rhs(i), &yvar)));
                below.push(format!("(<= {} {y})", var(i)));
            }
            if !binders.is_empty() {
                let _ = writeln!(
                    out,
                    "(assert (forall ({}) (=> (and {}) (and {}))))",
                    binders.join(" "),
                    premises.join(" "),
                    below.join(" ")
                );
            }
            let lhs = smt_poly(&q.substituted(&q.lhs), &var);
            let rhs = smt_poly(&q.substituted(&q.rhs), &var);
            let _ = writeln!(out, "(assert ({} {lhs} {rhs}))\n(check-sat)", q.rel.symbol());
        }
    }
    out
}
