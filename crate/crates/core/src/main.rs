use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use globe_ce::pipeline::{self, Command, Overrides};

#[derive(Parser)]
#[command(
    name = "globe-ce",
    version,
    about = "Global counterfactual explanations for tabular classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config worker count.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate, select and scale translations; emit profiles, histograms and rule charts.
    Explain(Common),
    /// Compare the recourse of two subgroups on a shared translation pool.
    Compare(Common),
    /// Run the Fast AReS baseline.
    Ares(Common),
    /// Side-by-side table of GLOBE-CE, dGLOBE-CE and Fast AReS.
    Bench(Common),
    /// Train a native model on the labelled dataset.
    Fit(Common),
    /// Print a model summary.
    InspectModel(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Explain(c) => (Command::Explain, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Ares(c) => (Command::Ares, c),
        Cmd::Bench(c) => (Command::Bench, c),
        Cmd::Fit(c) => (Command::Fit, c),
        Cmd::InspectModel(c) => (Command::InspectModel, c),
    };
    let overrides = Overrides {
        seed: c.seed,
        out: c.out,
        workers: c.workers,
    };
    match pipeline::run(command, &c.config, &overrides) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!("artifacts in {}", outcome.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
