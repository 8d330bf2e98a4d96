use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use vwlab::cli::{run, Command, OutputFormat, RunOptions};

#[derive(Parser)]
#[command(name = "vwlab", version, about = "Very weak solution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for net members.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the subcommand named by `command` in the config.
    Run(Common),
    Regularize(Common),
    Solve(Common),
    Net(Common),
    Existence(Common),
    Uniqueness(Common),
    Consistency(Common),
    Classical(Common),
    ConjugateCheck(Common),
    PsidoProbe(Common),
}

fn main() {
    let (command, c) = match Cli::parse().command {
        Sub::Run(c) => (None, c),
        Sub::Regularize(c) => (Some(Command::Regularize), c),
        Sub::Solve(c) => (Some(Command::Solve), c),
        Sub::Net(c) => (Some(Command::Net), c),
        Sub::Existence(c) => (Some(Command::Existence), c),
        Sub::Uniqueness(c) => (Some(Command::Uniqueness), c),
        Sub::Consistency(c) => (Some(Command::Consistency), c),
        Sub::Classical(c) => (Some(Command::Classical), c),
        Sub::ConjugateCheck(c) => (Some(Command::ConjugateCheck), c),
        Sub::PsidoProbe(c) => (Some(Command::PsidoProbe), c),
    };
    std::process::exit(run(&RunOptions {
        command,
        config: c.config,
        jobs: c.jobs,
        out: c.out,
        format: c.format,
    }));
}
