use std::path::PathBuf;
use std::process::ExitCode;

use bernoulli_cli::{emit_plot_data, execute, Mode, RunRequest};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bernoulli", version, about = "Bernoulli free boundary solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Newton-correct an initial curve to a free boundary.
    Solve(RunArgs),
    /// Solve, then classify the solution.
    Classify(RunArgs),
    /// Sweep Q values and seeds.
    Branch(RunArgs),
    /// Integrate the free boundary along a time-dependent Q.
    Flow(RunArgs),
    /// Tabulate the radial branches.
    Oracle(RunArgs),
    /// Solve and report the harmonic moments and their certificates.
    Moments(RunArgs),
    /// Write curves.csv / branch.csv / drift.csv from a finished run.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Finished run directory.
    run: PathBuf,
    /// Where to write the tables (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let (mode, args) = match Cli::parse().command {
        Command::Solve(a) => (Mode::Solve, a),
        Command::Classify(a) => (Mode::Classify, a),
        Command::Branch(a) => (Mode::Branch, a),
        Command::Flow(a) => (Mode::Flow, a),
        Command::Oracle(a) => (Mode::Oracle, a),
        Command::Moments(a) => (Mode::Moments, a),
        Command::Plot(p) => {
            let out = p.out.unwrap_or_else(|| p.run.clone());
            return match emit_plot_data(&p.run, &out) {
                Ok(files) => {
                    if p.verbose {
                        for f in files {
                            eprintln!("[bernoulli] wrote {}", f.display());
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(e.exit_code())
                }
            };
        }
    };
    code(execute(&RunRequest { mode, config: args.config, out: args.out, verbose: args.verbose }))
}
