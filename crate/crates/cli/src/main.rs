#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod demo;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phsplit::SchemeKind;

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Exit code 1.
    Validation(String),
    /// Exit code 2.
    Usage(String),
    /// Exit code 3.
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<phsplit::Error> for Failure {
    fn from(e: phsplit::Error) -> Self {
        use phsplit::Error::*;
        let msg = e.to_string();
        match e {
            NotPsd { .. } | SkewViolation(_) => Failure::Validation(msg),
            SingularCayley { .. } | SingularStepMatrix { .. } | IrregularPencil | NonInvertibleE { .. } => {
                Failure::Numerical(msg)
            }
            _ => Failure::Usage(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "phsplit", version, about = "Dynamic iteration for coupled port-Hamiltonian DAEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct OutArg {
    /// Output directory [default: phsplit-out].
    #[arg(long, env = "PHSPLIT_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct ModelArgs {
    /// Built-in model name or path to a model file.
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter override, `key=value` (built-in models only).
    #[arg(long = "param", value_parser = config::parse_pair)]
    pub params: Vec<(String, f64)>,
    /// Time horizon.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Number of grid samples.
    #[arg(long = "N")]
    pub n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural and solvability assumptions of a model.
    Validate {
        /// Built-in model name or path to a model file.
        model: String,
        #[arg(long = "param", value_parser = config::parse_pair)]
        params: Vec<(String, f64)>,
    },
    /// Solve a model monolithically and optionally run a dynamic iteration.
    Run(RunArgs),
    /// Tabulate the contraction factor q(λ) of the Lions-Mercier iteration.
    Rates(RatesArgs),
    /// Run one of the preconfigured experiments.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(demo::NAMES))]
        name: String,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args, Clone, Debug, Default)]
#[command(group(clap::ArgGroup::new("method").args(["jacobi", "lm", "none"])))]
pub struct RunArgs {
    /// Experiment config file (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Time-stepping scheme.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Jacobi waveform relaxation, keys H, max_sweeps, tol.
    #[arg(long, num_args = 0.., value_parser = config::parse_pair)]
    pub jacobi: Option<Vec<(String, f64)>>,
    /// Lions-Mercier iteration, keys lambda, mu, omega, alpha, max_iters, tol.
    #[arg(long, num_args = 0.., value_parser = config::parse_pair)]
    pub lm: Option<Vec<(String, f64)>>,
    /// Only compute the monolithic reference.
    #[arg(long)]
    pub none: bool,
    /// Refinement factor of the reference grid.
    #[arg(long)]
    pub refine: Option<usize>,
    /// Run even if validation fails.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Clone, Debug)]
pub struct RatesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Smallest λ [default: λ*/10].
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Largest λ [default: 10λ*].
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Number of logarithmically spaced λ values.
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum SchemeArg {
    ImplicitEuler,
    Trapezoidal,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::ImplicitEuler => SchemeKind::ImplicitEuler,
            SchemeArg::Trapezoidal => SchemeKind::Trapezoidal,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { model, params } => commands::validate(&model, &params),
        Command::Run(args) => commands::run(&args),
        Command::Rates(args) => commands::rates(&args),
        Command::Demo { name, out } => demo::run(&name, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
