//! `nlskdv`: run simulation, stabilization, control and diagnostic scenarios
//! from a TOML or JSON config and write plot-ready reports.

mod config;
mod failure;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{apply_overrides, load, Command, ScenarioConfig};
use failure::Failure;

#[derive(Parser)]
#[command(name = "nlskdv", version, about = "Coupled Schrödinger–KdV simulation and control on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config (TOML, or JSON with a `.json` extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set params.width=1.57`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory. Defaults to `<NLSKDV_OUT or ./nlskdv-out>/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the system and record the energy history.
    Simulate(Common),
    /// Closed-loop run with an exponential fit of the energy.
    Stabilize(Common),
    /// Exact control to the target (linear HUM or nonlinear local).
    Control(Common),
    /// Stabilize, steer and retrace between two states of equal v-mean.
    Transfer(Common),
    /// Symbol scan and random-ensemble estimate ratios.
    Diagnose(Common),
    /// Repeat a scenario over values of one config field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Scenario to repeat; defaults to the config's `command`.
        #[arg(long, value_parser = parse_command)]
        command: Option<Command>,
        /// Dotted config field, e.g. `params.width`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

fn parse_command(s: &str) -> Result<Command, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown command `{s}`"))
}

#[derive(Clone, Copy)]
enum Mode {
    Single(Command),
    Sweep,
}

fn out_root() -> PathBuf {
    std::env::var_os("NLSKDV_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("nlskdv-out"))
}

fn resolve(common: &Common) -> Result<ScenarioConfig, Failure> {
    let base = match &common.config {
        Some(p) => load(p)?,
        None => ScenarioConfig::default(),
    };
    let mut cfg = apply_overrides(&base, &common.sets)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (mode, common, sweep_args) = match cli.command {
        Cmd::Simulate(c) => (Mode::Single(Command::Simulate), c, None),
        Cmd::Stabilize(c) => (Mode::Single(Command::Stabilize), c, None),
        Cmd::Control(c) => (Mode::Single(Command::Control), c, None),
        Cmd::Transfer(c) => (Mode::Single(Command::Transfer), c, None),
        Cmd::Diagnose(c) => (Mode::Single(Command::Diagnose), c, None),
        Cmd::Sweep {
            common,
            command,
            axis,
            values,
        } => (Mode::Sweep, common, Some((command, axis, values))),
    };
    let cfg = resolve(&common)?;
    match mode {
        Mode::Single(command) => {
            let out = common.out.clone().unwrap_or_else(|| out_root().join(command.name()));
            let report = run::run(command, &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&report.results).expect("results serialize"));
            eprintln!("wrote {}", out.join("report.json").display());
        }
        Mode::Sweep => {
            let (command, axis, values) = sweep_args.expect("sweep arguments");
            let command = command
                .or(cfg.command)
                .ok_or_else(|| Failure::Validation("sweep needs `--command` or `command` in the config".into()))?;
            let out = common.out.clone().unwrap_or_else(|| out_root().join("sweep"));
            let rows = sweep::sweep(command, &cfg, &axis, &values, &out)?;
            for r in &rows {
                eprintln!("run {:03} {}={} {}", r.index, axis, r.value, r.status);
            }
            eprintln!("wrote {}", out.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.tag());
            ExitCode::from(e.code() as u8)
        }
    }
}
