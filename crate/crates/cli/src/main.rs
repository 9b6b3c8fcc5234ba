//! `lcns` command-line driver: binds JSON configurations to the experiments and
//! writes CSV tables, a JSON summary and a run manifest.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use commands::{Command, Outcome, RunError};
use config::{SchemaError, Section};

#[derive(Debug, Parser)]
#[command(name = "lcns", version, about = "Spectral, beam, observability and control experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a configuration field, e.g. `--set params.T=0.5` or `--set ladder=[0.01,0.005,0.002,0.001]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(cli: &Cli) -> Result<Value, SchemaError> {
    let mut value = config::load(cli.config.as_deref())?;
    for o in &cli.overrides {
        config::apply_override(&mut value, o)?;
    }
    Ok(value)
}

fn execute(cmd: Command, value: &Value) -> Result<(Outcome, Value), RunError> {
    let root = Section::root(value)?;
    let (common, threads) = commands::common(&root)?;
    lcns::exec::configure_threads(threads).map_err(RunError::Numerical)?;
    let outcome = commands::run(cmd, &root, common)?;
    root.finish()?;
    let run = json!({ "seed": common.seed, "execution": common.exec, "threads": threads });
    Ok((outcome, run))
}

fn write_outputs(dir: &Path, cmd: Command, config: &Value, run: Value, outcome: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, table) in &outcome.tables {
        table.save(&dir.join(name)).map_err(std::io::Error::other)?;
    }
    let passed = outcome.checks.iter().all(|c| c.passed);
    let summary = json!({ "command": cmd.name(), "passed": passed, "checks": outcome.checks, "results": outcome.summary });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let timings: serde_json::Map<String, Value> = outcome.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let manifest = json!({
        "command": cmd.name(),
        "config": config,
        "run": run,
        "versions": { "lcns": env!("CARGO_PKG_VERSION") },
        "outputs": outcome.tables.iter().map(|(n, _)| n.as_str()).chain(["summary.json"]).collect::<Vec<_>>(),
        "timings_s": timings,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).map_err(RunError::from).and_then(|v| execute(cli.command, &v).map(|r| (v, r)));
    let (config, (outcome, run)) = match result {
        Ok(r) => r,
        Err(RunError::Schema(e)) => {
            if e.pointer.is_empty() {
                eprintln!("configuration error: {}", e.reason);
            } else {
                eprintln!("configuration error at `{}`: {}", e.dotted(), e.reason);
            }
            return ExitCode::from(2);
        }
        Err(RunError::Numerical(e)) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&cli.out, cli.command, &config, run, &outcome) {
        eprintln!("cannot write outputs to {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    for c in &outcome.checks {
        println!("{} {} = {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, lcns::io::fmt_f64(c.value), c.requirement);
    }
    let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
