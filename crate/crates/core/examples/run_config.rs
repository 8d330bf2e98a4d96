//! Load a bundled config, run it through the library entry point and write
//! the report files.
//!
//!     cargo run --release --example run_config -- configs/consistency.toml /tmp/out

use std::path::PathBuf;
use vwlab::cli::{execute, write_outcome, ExperimentConfig, OutputFormat};

fn main() -> vwlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(
        args.next()
            .unwrap_or_else(|| "configs/conjugation.toml".into()),
    );
    let out = PathBuf::from(args.next().unwrap_or_else(|| "vwlab-out".into()));
    let config = ExperimentConfig::load(&path)?;
    let command = config.command.expect("config names a command");
    let t = std::time::Instant::now();
    let outcome = execute(&config, command)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for p in write_outcome(
        &outcome,
        &out,
        OutputFormat::Both,
        0.0,
        t.elapsed().as_secs_f64(),
        None,
    )? {
        println!("wrote {}", p.display());
    }
    println!("exit code would be {}", outcome.exit_code());
    Ok(())
}
