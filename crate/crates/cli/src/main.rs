use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use regret_transport::ReductionMethod;

mod commands;
mod instance;

use commands::{CommandError, Report};

/// Problem-dependent transport costs, regret certificates and scenario
/// reduction for finite two-stage programs.
#[derive(Parser)]
#[command(name = "regret-transport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FileArgs {
    /// Instance file (TOML).
    #[arg(long)]
    file: PathBuf,
    /// Also write the machine-readable report here (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal value, minimizer and recourse table under P.
    Solve(FileArgs),
    /// Regret matrix and domination certificate on the support of P and nu.
    Regret(FileArgs),
    /// Two-sided stability check between P and nu.
    Stability {
        #[command(flatten)]
        io: FileArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Reduce P to m atoms and audit the result.
    Reduce {
        #[command(flatten)]
        io: FileArgs,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Worked numeric examples with known answers.
    PaperExamples {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exhaustive,
    Greedy,
    Swap,
}

impl From<Method> for ReductionMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Exhaustive => ReductionMethod::Exhaustive,
            Method::Greedy => ReductionMethod::Greedy,
            Method::Swap => ReductionMethod::Swap,
        }
    }
}

fn run(cli: Cli) -> Result<(Report, Option<PathBuf>), CommandError> {
    Ok(match cli.command {
        Command::Solve(io) => (commands::solve(&instance::load(&io.file)?)?, io.out),
        Command::Regret(io) => (commands::regret(&instance::load(&io.file)?)?, io.out),
        Command::Stability { io, tol } => (commands::stability(&instance::load(&io.file)?, tol)?, io.out),
        Command::Reduce { io, m, method, tol } => (
            commands::reduce(&instance::load(&io.file)?, m, method.map(Into::into), tol)?,
            io.out,
        ),
        Command::PaperExamples { out } => (commands::paper_examples()?, out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, out) = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print!("{}", report.text);
    if let Some(path) = out {
        let body = serde_json::to_string_pretty(&report.json).expect("JSON values serialize") + "\n";
        if let Err(e) = std::fs::write(&path, body) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
