//! `moncon`: certify, simulate and report on monotone ODE models from a JSON spec.

mod artifacts;
mod commands;
mod error;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moncon::NormKind;

#[derive(Parser, Debug)]
#[command(name = "moncon", version, about = "Contraction certificates and Lyapunov checks for monotone systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Measure,
    Certify,
    Lyapunov,
    Simulate,
    Entrain,
    Report,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print matrix measures of sampled Jacobians.
    Measure(Opts),
    /// Search sum- and max-separable weights and write certificates.
    Certify(Opts),
    /// Build the Lyapunov functions the certificates allow and check decrease.
    Lyapunov(Opts),
    /// Run the monotonicity, contraction and flow-decay suites.
    Simulate(Opts),
    /// Poincaré analysis for periodically forced models.
    Entrain(Opts),
    /// Summarize the artifacts of a run.
    Report(Opts),
}

#[derive(Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct Opts {
    /// Model spec JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub margin: f64,
    /// RK4 step.
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    /// Restrict to one norm (l1 or linf).
    #[arg(long)]
    pub norm: Option<NormKind>,
    /// Parent of the run directories.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

impl Command {
    fn split(self) -> (CommandKind, Opts) {
        match self {
            Command::Measure(o) => (CommandKind::Measure, o),
            Command::Certify(o) => (CommandKind::Certify, o),
            Command::Lyapunov(o) => (CommandKind::Lyapunov, o),
            Command::Simulate(o) => (CommandKind::Simulate, o),
            Command::Entrain(o) => (CommandKind::Entrain, o),
            Command::Report(o) => (CommandKind::Report, o),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors share exit code 1 with the other validation failures
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, opts) = cli.command.split();
    let mut dir = None;
    let result = run::Context::open(&opts).and_then(|ctx| {
        dir = Some(ctx.dir.path().to_path_buf());
        commands::dispatch(kind, &ctx)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let target = dir.unwrap_or(opts.out);
            if let Err(io) = error::write_error_json(&target, kind, &e) {
                eprintln!("error: could not write error.json: {io}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
