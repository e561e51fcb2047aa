mod cli;
mod commands;
mod data;
mod error;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use cli::{Cli, Command};
use error::Result;
use output::Outputs;

fn run(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let (name, mut out, args, seed) = match &cli.command {
        Command::Fit(a) => ("fit", commands::fit(a)?, json!(a), None),
        Command::Influence(a) => ("influence", commands::influence(a)?, json!(a), None),
        Command::Simulate(a) => ("simulate", commands::simulate(a)?, json!(a), Some(a.seed)),
        Command::Bench(a) => ("bench", commands::bench(a)?, json!(a), Some(a.seed)),
    };
    out.json(
        "manifest.json",
        &json!({
            "command": name,
            "args": args,
            "seed": seed,
            "otdr_version": otdr::VERSION,
            "cli_version": env!("CARGO_PKG_VERSION"),
            "wall_seconds": start.elapsed().as_secs_f64(),
        }),
    )?;
    for path in out.write_all(out_dir(cli))? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn out_dir(cli: &Cli) -> &std::path::Path {
    match &cli.command {
        Command::Fit(a) => &a.common.out,
        Command::Influence(a) => &a.common.out,
        Command::Simulate(a) => &a.common.out,
        Command::Bench(a) => &a.common.out,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = e.to_json();
            eprintln!("{body}");
            let mut o = Outputs::default();
            // best effort; the stderr copy is authoritative
            if o.json("error.json", &body).is_ok() {
                let _ = o.write_all(out_dir(&cli));
            }
            ExitCode::FAILURE
        }
    }
}
