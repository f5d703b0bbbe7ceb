use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use twinbeam::commands::{self, Command, RunOptions};
use twinbeam::output::write_atomic;
use twinbeam::scenario::Scenario;
use twinbeam::{Error, Result};

const SEED_ENV: &str = "TWINBEAM_SEED";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Laser,
    Cavity,
    Opo,
    Lock,
    Bench,
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Laser => Command::Laser,
            Cmd::Cavity => Command::Cavity,
            Cmd::Opo => Command::Opo,
            Cmd::Lock => Command::Lock,
            Cmd::Bench => Command::Bench,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

/// Laser, NOPO and twin-beam detection simulator.
#[derive(Debug, Parser)]
#[command(name = "twinbeam", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,

    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,

    /// Output directory for CSV files and summary.json.
    #[arg(long, default_value = "twinbeam-out")]
    out: PathBuf,

    /// RNG seed; overrides TWINBEAM_SEED and the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Pump power in mW (laser and opo commands).
    #[arg(long)]
    pump: Option<f64>,

    /// Simulated duration in seconds (lock command).
    #[arg(long)]
    duration: Option<f64>,
}

fn resolve_seed(flag: Option<u64>, scenario: &Scenario) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::config(SEED_ENV, format!("not an unsigned integer: `{v}`"))),
        Err(std::env::VarError::NotPresent) => Ok(scenario.metadata.seed),
        Err(e) => Err(Error::config(SEED_ENV, e.to_string())),
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let scenario = Scenario::load(&cli.scenario)?;
    let opts = RunOptions {
        seed: resolve_seed(cli.seed, &scenario)?,
        pump_mw: cli.pump,
        duration: cli.duration,
    };
    let report = commands::run(cli.command.into(), &scenario, &opts)?;
    for (name, contents) in &report.files {
        let path = write_atomic(&cli.out, name, contents.as_bytes())?;
        println!("wrote {}", path.display());
    }
    let mut summary = serde_json::to_string_pretty(&report.summary).expect("json value");
    summary.push('\n');
    let path = write_atomic(&cli.out, "summary.json", summary.as_bytes())?;
    println!("wrote {}", path.display());
    for line in &report.messages {
        println!("{line}");
    }
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
