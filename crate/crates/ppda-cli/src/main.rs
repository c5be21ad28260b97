//! `ppda`: command-line model checker for probabilistic pushdown automata.
//!
//! Every command prints one JSON document on standard output and a short
//! summary on standard error. Exit status is 0 when a result was computed
//! (an `unknown` verdict included), 1 for bad input and 2 for internal
//! failures.

mod commands;
mod error;
mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ppda::solver::{Backend, Oracle, SolverCommand};
use ppda::Rational;

use inputs::{rational_arg, Threshold};

#[derive(Debug, Parser)]
#[command(name = "ppda", version, about = "Model checking for probabilistic pushdown automata")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Decision procedure for threshold comparisons.
    #[arg(long, global = true, default_value = "auto")]
    backend: Backend,
    /// External SMT solver; a `{}` argument is replaced by a script file,
    /// otherwise the script is piped to standard input.
    #[arg(long, global = true, env = "PPDA_SOLVER")]
    solver_cmd: Option<String>,
    /// Largest acceptable width of reported intervals.
    #[arg(long, global = true, default_value = "1/1000", value_parser = rational_arg)]
    width: Rational,
    /// Seconds allowed per external solver call.
    #[arg(long, global = true, default_value_t = 60)]
    timeout: u64,
    /// Print JSON on one line.
    #[arg(long, global = true)]
    compact: bool,
}

impl Global {
    fn oracle(&self) -> Oracle {
        let oracle = Oracle::new(self.backend).with_timeout(Duration::from_secs(self.timeout));
        match self.solver_cmd.as_deref().and_then(SolverCommand::parse) {
            Some(cmd) => oracle.with_solver(Some(cmd)),
            None => oracle,
        }
    }
}

/// Observer or Muller automaton file.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PropertyFile {
    /// Observing automaton.
    #[arg(long)]
    observer: Option<PathBuf>,
    /// Deterministic Muller automaton over heads.
    #[arg(long)]
    muller: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and check a model and optional companion files.
    Validate {
        model: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        observer: Option<PathBuf>,
        #[arg(long)]
        muller: Option<PathBuf>,
    },
    /// Bracket P(c, C1 U C2), optionally deciding a threshold.
    Until {
        model: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        c1: String,
        #[arg(long)]
        c2: String,
        #[arg(long)]
        config: String,
        /// Comparison such as `>= 1/4`, decided by the oracle.
        #[arg(long, value_parser = inputs::threshold_arg)]
        threshold: Option<Threshold>,
        /// Also narrow the value to an interval of this width by bisection.
        #[arg(long, value_parser = rational_arg)]
        lambda: Option<Rational>,
    },
    /// Bracket the probability that a run never empties its stack.
    Irun {
        model: PathBuf,
        #[arg(long)]
        config: String,
    },
    /// Check a qualitative PCTL formula.
    Pctl {
        model: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        formula: String,
        #[arg(long, required = true)]
        config: Vec<String>,
    },
    /// Error-tolerant check of a PCTL formula on a single-state system.
    PctlApprox {
        model: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        formula: String,
        #[arg(long, required = true)]
        config: Vec<String>,
        #[arg(long, default_value = "1/10", value_parser = rational_arg)]
        lambda: Rational,
    },
    /// Bracket the probability that runs satisfy an ω-regular property.
    Omega {
        model: PathBuf,
        #[command(flatten)]
        property: PropertyFile,
        #[arg(long)]
        config: String,
        #[arg(long, value_parser = inputs::threshold_arg)]
        threshold: Option<Threshold>,
    },
    /// Dump the finite chain over stack minima.
    Chain {
        model: PathBuf,
        #[command(flatten)]
        property: PropertyFile,
        /// Print the chain as text instead of JSON.
        #[arg(long)]
        text: bool,
    },
    /// Write the SMT-LIB script deciding a comparison.
    ExportSmt {
        model: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        c1: String,
        #[arg(long, default_value = "empty")]
        c2: String,
        /// `TERM REL VALUE`, where TERM is `X.eps`, `X.bullet`, `p.X.q`,
        /// `p.X.bullet` or `P(config)`.
        #[arg(long)]
        query: String,
        /// Script destination; the script is embedded in the JSON otherwise.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also run the external solver on the script.
        #[arg(long)]
        check: bool,
    },
    /// Estimate until or acceptance probabilities by sampling runs.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        config: String,
        #[arg(long, default_value = "all")]
        c1: String,
        #[arg(long, conflicts_with_all = ["observer", "muller"])]
        c2: Option<String>,
        #[arg(long)]
        observer: Option<PathBuf>,
        #[arg(long, conflicts_with = "observer")]
        muller: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 1_000)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Until { .. } => "until",
            Command::Irun { .. } => "irun",
            Command::Pctl { .. } => "pctl",
            Command::PctlApprox { .. } => "pctl-approx",
            Command::Omega { .. } => "omega",
            Command::Chain { .. } => "chain",
            Command::ExportSmt { .. } => "export-smt",
            Command::Simulate { .. } => "simulate",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; bad usage is bad input.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let name = cli.command.name();
    let oracle = cli.global.oracle();
    let outcome = commands::run(&cli.command, &cli.global, &oracle);
    let (document, code) = match outcome {
        Ok(commands::Outcome::Raw(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Ok(commands::Outcome::Report(report)) => {
            eprintln!("{name}: {}", report.summary);
            (output::success(name, &cli.global, &oracle, report), 0)
        }
        Err(e) => {
            eprintln!("ppda {name}: error: {e}");
            (output::failure(name, &e), e.exit_code())
        }
    };
    let text = if cli.global.compact {
        serde_json::to_string(&document)
    } else {
        serde_json::to_string_pretty(&document)
    };
    match text {
        Ok(t) => println!("{t}"),
        Err(e) => {
            eprintln!("ppda {name}: cannot render output: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code as u8)
}
