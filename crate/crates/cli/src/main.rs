use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vmfejer::{GenerateKind, Overrides, Phi};
use vmfejer_cli::{cmd_generate, cmd_report, cmd_run, cmd_validate, ReportOptions};

/// Variable-metric quasi-Fejér solvers with per-run monotonicity certificates.
#[derive(Parser)]
#[command(name = "vmfejer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, solve and certify a problem file.
    Run {
        problem: PathBuf,
        /// Directory for trace.jsonl, certificate.json and summary.json.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print the hypothesis table of a problem file.
    Validate {
        problem: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Certify a stored trace against targets.
    Report {
        trace: PathBuf,
        /// JSON vector, list of vectors, or a file with a `targets` field.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Output directory; defaults to the trace's directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PhiArg::Abs)]
        phi: PhiArg,
        /// Infer the error terms instead of using the logged envelope.
        #[arg(long)]
        auto_eps: bool,
    },
    /// Write a seeded synthetic problem file.
    Generate {
        #[arg(value_enum)]
        kind: KindArg,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { max_iter: a.max_iter, tol: a.tol, seed: a.seed, epsilon: a.epsilon }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiArg {
    Abs,
    Square,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Polyhedron,
    InverseProblem,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut stdout = std::io::stdout();
    let code = match cli.command {
        Command::Run { problem, out, overrides } => cmd_run(&problem, &out, &overrides.into(), &mut stdout),
        Command::Validate { problem, overrides } => cmd_validate(&problem, &overrides.into(), &mut stdout),
        Command::Report { trace, targets, out, phi, auto_eps } => {
            let dir = out.unwrap_or_else(|| {
                trace.parent().filter(|p| !p.as_os_str().is_empty()).map(PathBuf::from).unwrap_or_else(|| ".".into())
            });
            let phi = match phi {
                PhiArg::Abs => Phi::Abs,
                PhiArg::Square => Phi::Square,
            };
            cmd_report(&trace, targets.as_deref(), &dir, &ReportOptions { phi, auto_eps }, &mut stdout)
        }
        Command::Generate { kind, dim, seed, out } => {
            let kind = match kind {
                KindArg::Polyhedron => GenerateKind::Polyhedron,
                KindArg::InverseProblem => GenerateKind::InverseProblem,
            };
            cmd_generate(kind, dim, seed, &out, &mut stdout)
        }
    };
    ExitCode::from(code as u8)
}
