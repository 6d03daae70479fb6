use std::path::PathBuf;

use clap::{Parser, Subcommand};
use twotime_cli::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "twotime", version, about = "Two-timescale averaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized initial data and bracket checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the Jacobi identity and, optionally, the averaging cocycle.
    AlgebraCheck(Common),
    /// Evaluate the averaged vector field at a point.
    AvgRhs(Common),
    /// Integrate the (shifted) Euler or Lie-Poisson equation.
    EulerRun(Common),
    /// Integrate the reduced equations on T*Q x g*.
    ReducedRun(Common),
    /// Integrate the 2D Craik-Leibovich vorticity equation.
    Cl2d(Common),
    /// Run an epsilon sweep comparing fast and averaged dynamics.
    Sweep(Common),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let (command, common) = match cli.command {
        Sub::AlgebraCheck(c) => (Command::AlgebraCheck, c),
        Sub::AvgRhs(c) => (Command::AvgRhs, c),
        Sub::EulerRun(c) => (Command::EulerRun, c),
        Sub::ReducedRun(c) => (Command::ReducedRun, c),
        Sub::Cl2d(c) => (Command::Cl2d, c),
        Sub::Sweep(c) => (Command::Sweep, c),
    };
    let inv = Invocation {
        command,
        config: common.config,
        out: common.out,
        seed: common.seed,
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(&inv, &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
