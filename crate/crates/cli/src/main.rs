//! `symint`: run problem suites, genetic searches, archive verification and
//! reports against a reference, faulty or external integrator.

mod backend;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "symint", version, about = "Robustness evaluation of symbolic integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a problem suite and measure Fail@k.
    #[command(args_override_self = true)]
    Suite(SuiteArgs),
    /// Search for failures with the genetic algorithm.
    #[command(args_override_self = true)]
    Sagga(SaggaArgs),
    /// Re-check an archive or a problem file.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Render summaries from record and archive files.
    #[command(args_override_self = true)]
    Report(ReportArgs),
}

/// Flags shared by every subcommand. `--config FILE` is handled before
/// parsing and may supply any of them.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Run seed; every random draw derives from it.
    #[arg(long)]
    seed: u64,
    /// reference | faulty:SPEC | external:cmd=COMMAND | external:tcp=HOST:PORT
    #[arg(long, default_value = "reference")]
    model: String,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Count verification timeouts as incorrect.
    #[arg(long)]
    strict_timeout: bool,
    /// Verification budget per candidate, in seconds.
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Primitives,
    Perturb,
    Compose,
    Exp,
    Random,
    Extrapolation,
    File,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Divide,
    Scale,
    AddExp,
    AddLn,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    family: Family,
    /// Coefficient range LO:HI.
    #[arg(long, default_value = "1:100")]
    range: String,
    /// Problems per template, composition arity or tree size.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Comma-separated templates (ln, exp, linear, pow42, sin, cos, tan).
    #[arg(long, default_value = "ln,exp,linear,pow42,sin,cos,tan")]
    templates: String,
    /// Perturbation; every kind when omitted.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Perturbation coefficient range LO:HI.
    #[arg(long, default_value = "1:100")]
    k_range: String,
    /// Comma-separated composition arities.
    #[arg(long, default_value = "2,3,4")]
    arity: String,
    /// Operators per random tree.
    #[arg(long, default_value_t = 3)]
    ops: usize,
    /// Comma-separated half-open coefficient buckets LO:HI.
    #[arg(long, default_value = "1:100,100:1000,1000:10000,10000:100000")]
    buckets: String,
    /// Problem file (`problem<TAB>truth` per line) for `--family file`.
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Comma-separated k values.
    #[arg(long, default_value = "1,10,50")]
    k: String,
    #[arg(long, default_value_t = 10)]
    beam: usize,
    /// Record file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mutations {
    All,
    Constant,
}

#[derive(Args, Debug)]
struct SaggaArgs {
    #[command(flatten)]
    common: Common,
    /// short | length:L | near:FILE | trig | trig:INNER
    #[arg(long, default_value = "short")]
    fitness: String,
    /// Seed set name (default, poly, trig, trig_general) or a file of
    /// infix expressions.
    #[arg(long, default_value = "default")]
    seeds: String,
    #[arg(long, value_enum, default_value = "all")]
    mutations: Mutations,
    /// Constant range LO:HI for mutations.
    #[arg(long)]
    int_range: Option<String>,
    #[arg(long, default_value_t = 100)]
    seed_size: usize,
    #[arg(long, default_value_t = 1000)]
    generation_size: usize,
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long, default_value_t = 1000)]
    archive_size: usize,
    #[arg(long, default_value_t = 1)]
    eval_k: usize,
    #[arg(long, default_value_t = 10)]
    beam: usize,
    /// Generation cap.
    #[arg(long, default_value_t = 50)]
    generations: usize,
    /// Archive file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint file; defaults to the archive path with `.ckpt` appended.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Archive whose entries must all be failures.
    #[arg(long, conflicts_with = "problems", required_unless_present = "problems")]
    archive: Option<PathBuf>,
    /// Ask the model again instead of using the stored candidates.
    #[arg(long)]
    requery: bool,
    #[arg(long, default_value_t = 1)]
    eval_k: usize,
    #[arg(long, default_value_t = 10)]
    beam: usize,
    /// Problem file whose listed antiderivatives are checked.
    #[arg(long)]
    problems: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Record file, optionally as NAME=PATH. Repeatable.
    #[arg(long, action = clap::ArgAction::Append)]
    records: Vec<String>,
    /// Archive file, optionally as NAME=PATH. Repeatable.
    #[arg(long, action = clap::ArgAction::Append)]
    archive: Vec<String>,
    /// Skip the search-vs-model report.
    #[arg(long)]
    no_search: bool,
}

/// Why a command stopped.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Backend(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Backend(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Suite(a) => commands::suite(a),
        Command::Sagga(a) => commands::sagga(a),
        Command::Verify(a) => commands::verify(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Backend(m) => eprintln!("backend failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
