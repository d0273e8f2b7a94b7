//! `gfra`: parameter sweeps over the conventional and IRT access systems.
//!
//! Exit codes: 0 success, 1 invalid configuration or I/O failure, 2 every
//! simulated point tripped the instability watchdog, 3 an acceptance
//! criterion failed under `--check`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use gfra_core::acceptance;
use gfra_core::experiment::{run_experiment, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "gfra",
    version,
    about = "Grant-free random access sweeps with analytic overlays"
)]
struct Cli {
    /// Key-value configuration file (`key = value` per line, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// conventional | irt | both | analytic-only | chain
    #[arg(long)]
    mode: Option<String>,
    /// Sweep axis: lambda | Gamma_dB | M | L
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<String>,
    #[arg(long)]
    step: Option<String>,
    /// Slots per trial, warm-up included.
    #[arg(long)]
    slots: Option<String>,
    /// Warm-up slots (default: 10% of slots, at least 1000, at most half).
    #[arg(long)]
    warmup: Option<String>,
    /// Independent trials per sweep point.
    #[arg(long)]
    trials: Option<String>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<String>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<String>,
    /// Any configuration key, e.g. `--set M=80 --set gamma_dB=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run the acceptance suite and print one PASS/FAIL line per criterion.
    #[arg(long)]
    check: bool,
}

impl Cli {
    fn flag_overrides(&self) -> Vec<(&'static str, &str)> {
        [
            ("mode", &self.mode),
            ("sweep", &self.sweep),
            ("from", &self.from),
            ("to", &self.to),
            ("step", &self.step),
            ("slots", &self.slots),
            ("warmup", &self.warmup),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("jobs", &self.jobs),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

/// Defaults, then the file, then `--set`, then dedicated flags.
fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        config
            .apply_text(&text)
            .with_context(|| format!("in config file {}", path.display()))?;
    }
    for kv in &cli.overrides {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        config.set(key, value)?;
    }
    for (key, value) in cli.flag_overrides() {
        config.set(key, value).with_context(|| format!("--{key}"))?;
    }
    config.validate()?;
    Ok(config)
}

fn run_check(cli: &Cli) -> ExitCode {
    let seed = match cli.seed.as_deref().map(str::parse::<u64>) {
        None => 20240601,
        Some(Ok(s)) => s,
        Some(Err(_)) => {
            eprintln!("error: invalid --seed");
            return ExitCode::from(1);
        }
    };
    let mut all = true;
    for report in acceptance::run_all(seed) {
        println!("{report}");
        all &= report.passed;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.check {
        return run_check(&cli);
    }
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let table = match run_experiment(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let csv = table.to_csv();
    let written = match &config.output_path {
        Some(path) => fs::write(path, &csv).with_context(|| format!("writing {path}")),
        None => {
            print!("{csv}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if table.all_unstable() {
        eprintln!("warning: every simulated point tripped the instability watchdog");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
