//! `squall`: check properties of probabilistic models and run benchmark
//! suites.

mod bench;
mod check;
mod report;

use clap::{Parser, Subcommand};

/// Exit statuses shared by the subcommands.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const MODEL: i32 = 2;
    pub const TIMEOUT: i32 = 3;
}

#[derive(Parser)]
#[command(name = "squall", version, about = "Explicit-state probabilistic model checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check properties of a single model.
    Check(check::CheckArgs),
    /// Run a benchmark suite, one process per instance.
    Bench(bench::BenchArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Check(args) => check::run(args),
        Command::Bench(args) => bench::run(args),
    };
    std::process::exit(code);
}
