//! Batch front end: solves, scans, estimate checks and the correspondence maps.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::{CommandKind, Flags, Settings};
use serde_json::{json, Value};
use std::path::Path;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "hypersol", version, about = "Radial solutions of -Delta u - lambda u = |u|^{p-1} u on the Poincare ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shoot for a radial solution with a given number of sign changes.
    Solve(Flags),
    /// Classify trajectories over a log-spaced grid of initial values.
    Scan(Flags),
    /// Scan for decaying sign-changing solutions at the critical exponent.
    Nonexistence(Flags),
    /// Fit the scaling exponents of the cut-off bubble integrals.
    VerifyBubbles(Flags),
    /// Energy additivity of translated solutions plus bubbles.
    PsDemo(Flags),
    /// Estimate the radial best constant.
    Sobolev(Flags),
    /// Map to the Hardy-Sobolev-Maz'ya equation and sample the transported solution.
    MapHsm(Flags),
    /// Map to the Grushin equation and sample the transported solution.
    MapGrushin(Flags),
    /// Check the decay bounds of a computed solution.
    VerifyDecay(Flags),
}

impl Command {
    fn split(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Solve(f) => (CommandKind::Solve, f),
            Command::Scan(f) => (CommandKind::Scan, f),
            Command::Nonexistence(f) => (CommandKind::Nonexistence, f),
            Command::VerifyBubbles(f) => (CommandKind::VerifyBubbles, f),
            Command::PsDemo(f) => (CommandKind::PsDemo, f),
            Command::Sobolev(f) => (CommandKind::Sobolev, f),
            Command::MapHsm(f) => (CommandKind::MapHsm, f),
            Command::MapGrushin(f) => (CommandKind::MapGrushin, f),
            Command::VerifyDecay(f) => (CommandKind::VerifyDecay, f),
        }
    }
}

fn envelope(command: CommandKind, config: &Settings, status: &str) -> Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "artifact": "hypersol",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "status": status,
        "config": config,
        "timestamp": timestamp,
    })
}

fn write_report(dir: &Path, report: &Value) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), output::to_json_string(report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = cli.command.split();
    let (settings, out) = match config::resolve(kind, flags) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (report, code) = match commands::run(kind, &settings) {
        Ok(outcome) => {
            let mut report = envelope(kind, &settings, outcome.status);
            report["result"] = outcome.result;
            if let Err(e) = std::fs::create_dir_all(&out).and_then(|_| outcome.tables.iter().try_for_each(|t| t.write(&out)))
            {
                eprintln!("error: cannot write tables to {}: {e}", out.display());
                return ExitCode::from(3);
            }
            (report, if outcome.passed { 0 } else { 3 })
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            let code = failure.exit_code();
            let mut report = envelope(kind, &settings, "error");
            report["error"] = json!({"kind": failure.kind(), "message": failure.message(), "exit_code": code});
            (report, code)
        }
    };
    if let Err(e) = write_report(&out, &report) {
        eprintln!("error: cannot write report to {}: {e}", out.display());
        return ExitCode::from(3);
    }
    ExitCode::from(code as u8)
}
