//! `qnls`: batch front end for series construction, frequency diagnostics, asymptotics and
//! randomized checks. Reports are JSON on stdout; artifacts go to `--out`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qnls_core::Error;
use serde_json::{json, Value};

use commands::Artifacts;
use config::{Mode, RunConfig};

#[derive(Parser)]
#[command(name = "qnls", version, about = "Lindstedt series and small-divisor diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Truncation order.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Frequency window.
    #[arg(long, global = true)]
    window: Option<i64>,
    /// Nonlinearity strength.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Seed for the randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Coefficients and counterterms through the configured order.
    Compute,
    /// Residual of the truncated series only.
    Residual,
    /// Lattice infima, Bryuno partial sums and a Diophantine verdict.
    Bryuno,
    /// Counterterm tail fit.
    Asympt,
    /// Frequency-potential fixed point.
    Compat,
    /// Monte-Carlo measure of Diophantine failures.
    Measure,
    /// Randomized inequality and permutation suites.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Compute => "compute",
            Command::Residual => "residual",
            Command::Bryuno => "bryuno",
            Command::Asympt => "asympt",
            Command::Compat => "compat",
            Command::Measure => "measure",
            Command::Oracle => "oracle",
        }
    }
}

fn load_config(cli: &Cli) -> qnls_core::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if let Some(k) = cli.order {
        cfg.order = k;
    }
    if let Some(w) = cli.window {
        cfg.window = Some(w);
    }
    if let Some(e) = cli.eps {
        cfg.eps = e;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg.sequential |= cli.sequential;
    cfg.validate()?;
    Ok(cfg)
}

fn error_json(command: &str, err: &Error, cfg: Option<&RunConfig>) -> Value {
    let mut body = json!({
        "command": command,
        "status": "error",
        "kind": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    if let Error::DivisorTooSmall { j, nu, value, floor } = err {
        body["witness"] = json!({ "j": j, "nu": nu.to_text(), "value": value, "floor": floor });
    }
    if let Some(c) = cfg {
        body["config"] = serde_json::to_value(c).unwrap_or(Value::Null);
        body["seed"] = json!(c.seed);
    }
    body
}

fn run(command: Command, cfg: &RunConfig) -> qnls_core::Result<(Value, bool)> {
    let art = Artifacts::new(cfg.out.as_deref())?;
    let outcome = match command {
        Command::Compute => commands::compute(cfg, &art, false)?,
        Command::Residual => commands::compute(cfg, &art, true)?,
        Command::Bryuno => commands::bryuno(cfg, &art)?,
        Command::Asympt => commands::asympt(cfg, &art)?,
        Command::Compat => commands::compat(cfg, &art)?,
        Command::Measure => commands::measure(cfg, &art)?,
        Command::Oracle => commands::oracle(cfg, &art)?,
    };
    let report = json!({
        "command": command.name(),
        "status": if outcome.passed { "ok" } else { "check_failed" },
        "seed": cfg.seed,
        "config": cfg,
        "result": outcome.result,
    });
    art.text("report.json", &serde_json::to_string_pretty(&report)?)?;
    Ok((report, outcome.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            println!("{}", error_json(name, &e, None));
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli.command, &cfg) {
        Ok((report, passed)) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            println!("{}", error_json(name, &e, Some(&cfg)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
