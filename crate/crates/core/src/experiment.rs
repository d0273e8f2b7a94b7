//! Parameter sweeps over both access systems with analytic overlays, written
//! as CSV.
//!
//! Configuration is a flat `key = value` text file; the same keys can be set
//! one at a time with [`ExperimentConfig::set`], which is how command-line
//! overrides are applied on top of a file.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::{
    conventional_throughput, effective_arrival_rate, irt_stable, tau_pis, Bounds,
};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::protosim::{default_warmup, run_trial, Mode, ProtocolConfig};
use crate::queuedyn::Chain;
use crate::rng::{derive_seed, stream};
use crate::stats::{batch_mean, batch_ratio, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Conventional,
    Irt,
    Both,
    AnalyticOnly,
    Chain,
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Self::Conventional),
            "irt" => Ok(Self::Irt),
            "both" => Ok(Self::Both),
            "analytic-only" => Ok(Self::AnalyticOnly),
            "chain" => Ok(Self::Chain),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected conventional, irt, both, analytic-only or chain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    ThresholdDb,
    Antennas,
    Preambles,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::ThresholdDb => "Gamma_dB",
            SweepAxis::Antennas => "M",
            SweepAxis::Preambles => "L",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, SweepAxis::Antennas | SweepAxis::Preambles)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Self::Lambda),
            "Gamma_dB" => Ok(Self::ThresholdDb),
            "M" => Ok(Self::Antennas),
            "L" => Ok(Self::Preambles),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis '{other}' (expected lambda, Gamma_dB, M or L)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    pub sweep: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub antennas: u32,
    pub preambles: u32,
    pub snr_db: f64,
    pub threshold_db: f64,
    pub lambda: f64,
    pub slots: u64,
    /// `None` selects [`default_warmup`].
    pub warmup: Option<u64>,
    pub trials: u32,
    pub master_seed: u64,
    pub output_path: Option<String>,
    pub jobs: usize,
    pub type1_feedback: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Both,
            sweep: SweepAxis::Lambda,
            from: 2.0,
            to: 40.0,
            step: 2.0,
            antennas: 100,
            preambles: 64,
            snr_db: 6.0,
            threshold_db: 6.0,
            lambda: 20.0,
            slots: 100_000,
            warmup: None,
            trials: 1,
            master_seed: 1,
            output_path: None,
            jobs: 1,
            type1_feedback: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value '{value}' for '{key}'")))
}

impl ExperimentConfig {
    /// Sets one key. Keys: `mode`, `sweep`, `from`, `to`, `step`, `M`, `L`,
    /// `gamma_dB`, `Gamma_dB`, `lambda`, `slots`, `warmup`, `trials`, `seed`,
    /// `out`, `jobs`, `type1_feedback`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "mode" => self.mode = value.parse()?,
            "sweep" => self.sweep = value.parse()?,
            "from" => self.from = parse(key, value)?,
            "to" => self.to = parse(key, value)?,
            "step" => self.step = parse(key, value)?,
            "M" => self.antennas = parse(key, value)?,
            "L" => self.preambles = parse(key, value)?,
            "gamma_dB" => self.snr_db = parse(key, value)?,
            "Gamma_dB" => self.threshold_db = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "slots" => self.slots = parse(key, value)?,
            "warmup" => self.warmup = Some(parse(key, value)?),
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.master_seed = parse(key, value)?,
            "out" => self.output_path = Some(value.to_string()),
            "jobs" => self.jobs = parse(key, value)?,
            "type1_feedback" => self.type1_feedback = parse(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key = value'", n + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn effective_warmup(&self) -> u64 {
        self.warmup.unwrap_or_else(|| default_warmup(self.slots))
    }

    fn simulates(&self) -> bool {
        self.mode != RunMode::AnalyticOnly
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.step > 0.0) {
            return bad(format!("step must be > 0, got {}", self.step));
        }
        if !(self.from.is_finite() && self.to.is_finite()) || self.from > self.to {
            return bad(format!("empty sweep range [{}, {}]", self.from, self.to));
        }
        if self.jobs == 0 {
            return bad("jobs must be >= 1".into());
        }
        if self.simulates() {
            if self.trials == 0 {
                return bad("trials must be >= 1 unless mode is analytic-only".into());
            }
            if self.slots <= self.effective_warmup() {
                return bad(format!(
                    "slots ({}) must exceed warmup ({})",
                    self.slots,
                    self.effective_warmup()
                ));
            }
        }
        for v in self.points() {
            if self.sweep.is_integer() && (v.fract() != 0.0 || v < 1.0 || v > f64::from(u32::MAX)) {
                return bad(format!(
                    "{} sweep value {v} is not a positive integer",
                    self.sweep.name()
                ));
            }
            self.params_at(v)?;
        }
        Ok(())
    }

    /// Sweep values `from + i * step` up to and including `to`.
    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.from > self.to {
            return Vec::new();
        }
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.from + i as f64 * self.step).collect()
    }

    pub fn params_at(&self, value: f64) -> Result<SystemParams> {
        let (mut m, mut l, mut g_db, mut lambda) = (
            self.antennas,
            self.preambles,
            self.threshold_db,
            self.lambda,
        );
        match self.sweep {
            SweepAxis::Lambda => lambda = value,
            SweepAxis::ThresholdDb => g_db = value,
            SweepAxis::Antennas => m = value as u32,
            SweepAxis::Preambles => l = value as u32,
        }
        SystemParams::from_db(m, l, self.snr_db, g_db, lambda)
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    fn modes(&self) -> &'static [Mode] {
        match self.mode {
            RunMode::Conventional => &[Mode::Conventional],
            RunMode::Irt | RunMode::Chain => &[Mode::Irt],
            RunMode::Both | RunMode::AnalyticOnly => &[Mode::Conventional, Mode::Irt],
        }
    }
}

/// Simulated columns of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulated {
    pub throughput: Estimate,
    pub tau: Estimate,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub mode: &'static str,
    pub simulated: Option<Simulated>,
    pub analytic_throughput: f64,
    /// `None` when the IRT system is unstable and the bounds diverge.
    pub tau: Option<Bounds>,
    pub irt_stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub axis: SweepAxis,
    pub rows: Vec<ResultRow>,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "mode",
    "sim_throughput",
    "sim_throughput_hw",
    "sim_tau",
    "sim_tau_hw",
    "analytic_throughput",
    "tau_lower",
    "tau_upper",
    "tau_approx",
    "irt_stable",
    "unstable_flag",
];

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(self.axis.name());
        for c in CSV_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            let sim = |f: fn(&Simulated) -> f64| {
                r.simulated
                    .as_ref()
                    .map(|s| format_sig6(f(s)))
                    .unwrap_or_default()
            };
            let tau = |f: fn(&Bounds) -> f64| {
                r.tau
                    .as_ref()
                    .map_or("inf".to_string(), |b| format_sig6(f(b)))
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                format_sig6(r.sweep_value),
                r.mode,
                sim(|s| s.throughput.mean),
                sim(|s| s.throughput.half_width),
                sim(|s| if s.unstable {
                    f64::INFINITY
                } else {
                    s.tau.mean
                }),
                sim(|s| if s.unstable {
                    f64::INFINITY
                } else {
                    s.tau.half_width
                }),
                format_sig6(r.analytic_throughput),
                tau(|b| b.lower),
                tau(|b| b.upper),
                tau(|b| b.approx),
                r.irt_stable,
                r.simulated
                    .as_ref()
                    .map(|s| s.unstable.to_string())
                    .unwrap_or_default(),
            );
        }
        out
    }

    /// Every simulated row tripped the watchdog (false if nothing was simulated).
    pub fn all_unstable(&self) -> bool {
        let mut sims = self
            .rows
            .iter()
            .filter_map(|r| r.simulated.as_ref())
            .peekable();
        sims.peek().is_some() && sims.all(|s| s.unstable)
    }
}

/// Pools independent trials: mean of means, half-width `sqrt(sum hw^2) / n`.
fn pool(estimates: &[Estimate]) -> Estimate {
    let n = estimates.len() as f64;
    Estimate {
        mean: estimates.iter().map(|e| e.mean).sum::<f64>() / n,
        half_width: estimates
            .iter()
            .map(|e| e.half_width.powi(2))
            .sum::<f64>()
            .sqrt()
            / n,
    }
}

fn run_chain_trial(params: &SystemParams, slots: u64, warmup: u64, seed: u64) -> Result<Simulated> {
    let mut chain = Chain::new(*params, Chain::default_ceiling(params))?;
    let mut rng = stream(seed);
    let mut ks = Vec::new();
    let mut arrivals = Vec::new();
    let mut unstable = false;
    for t in 0..slots {
        match chain.step(&mut rng) {
            Ok(k) if t >= warmup => {
                ks.push(k as f64);
                arrivals.push(chain.last_arrivals() as f64);
            }
            Ok(_) => {}
            Err(Error::UnstableSystem { .. }) => {
                unstable = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Simulated {
        throughput: batch_mean(&arrivals),
        tau: batch_ratio(&ks, &arrivals),
        unstable,
    })
}

struct Task {
    point: usize,
    mode: Mode,
    trial: u32,
}

/// Runs every sweep point and mode; rows come out in sweep order whatever
/// the scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let points = config.points();
    let warmup = config.effective_warmup();
    let protocol = ProtocolConfig {
        type1_feedback: config.type1_feedback,
        ..ProtocolConfig::default()
    };

    let mut tasks = Vec::new();
    if config.simulates() {
        for point in 0..points.len() {
            for &mode in config.modes() {
                for trial in 0..config.trials {
                    tasks.push(Task { point, mode, trial });
                }
            }
        }
    }

    let pool_threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<Simulated>> = pool_threads.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let params = config.params_at(points[task.point])?;
                let seed = derive_seed(
                    config.master_seed,
                    &[task.point as u64, u64::from(task.trial)],
                );
                if config.mode == RunMode::Chain {
                    return run_chain_trial(&params, config.slots, warmup, seed);
                }
                let m = run_trial(task.mode, &params, &protocol, config.slots, warmup, seed)?;
                Ok(Simulated {
                    throughput: m.throughput,
                    tau: m.mean_retx,
                    unstable: m.unstable_flag,
                })
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let trials = config.trials as usize;
    let mut rows = Vec::new();
    let mut next = 0;
    for &value in &points {
        let params = config.params_at(value)?;
        let stable = irt_stable(&params);
        for &mode in config.modes() {
            let simulated = if config.simulates() {
                let chunk = &results[next..next + trials];
                next += trials;
                let throughputs: Vec<Estimate> = chunk.iter().map(|s| s.throughput).collect();
                let taus: Vec<Estimate> = chunk.iter().map(|s| s.tau).collect();
                Some(Simulated {
                    throughput: pool(&throughputs),
                    tau: pool(&taus),
                    unstable: chunk.iter().any(|s| s.unstable),
                })
            } else {
                None
            };
            let (name, analytic_throughput, tau) = match mode {
                Mode::Conventional => (
                    "conventional",
                    conventional_throughput(params.arrival_rate, &params),
                    Some(Bounds {
                        lower: 1.0,
                        upper: 1.0,
                        approx: 1.0,
                    }),
                ),
                Mode::Irt => (
                    if config.mode == RunMode::Chain {
                        "chain"
                    } else {
                        "irt"
                    },
                    effective_arrival_rate(params.arrival_rate, params.preambles),
                    tau_pis(&params).ok(),
                ),
            };
            rows.push(ResultRow {
                sweep_value: value,
                mode: name,
                simulated,
                analytic_throughput,
                tau,
                irt_stable: stable,
            });
        }
    }
    Ok(ResultTable {
        axis: config.sweep,
        rows,
    })
}
