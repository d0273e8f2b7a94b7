//! Acceptance suite: each criterion runs at its stated tolerance and reports
//! pass/fail with the measured numbers.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::analytic::{
    antenna_stability_bound, conventional_throughput, effective_arrival_rate, irt_stable, k_gamma,
    max_conventional_throughput, max_irt_throughput, mean_pis_bounds, mean_sinr_approx,
    sufficient_conditions,
};
use crate::chanmodel::{draw_channels, sinr_terms};
use crate::experiment::{run_experiment, ExperimentConfig, RunMode, SweepAxis};
use crate::params::{linear_to_db, SystemParams};
use crate::protosim::{default_warmup, run_trial, MetricsAccumulator, Mode, ProtocolConfig};
use crate::queuedyn::{
    drift_diagnostic, estimate_stationary_mean, negative_drift_threshold, q_gamma,
};
use crate::rng::{derive_seed, stream, SimRng};
use crate::stats::Estimate;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Collects sub-check outcomes into one report.
struct Checks {
    lines: Vec<String>,
    passed: bool,
}

impl Checks {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            passed: true,
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines
            .push(format!("{}{}", if ok { "" } else { "!" }, line));
    }

    fn finish(self, id: &'static str, title: &'static str, start: Instant) -> CriterionReport {
        CriterionReport {
            id,
            title,
            passed: self.passed,
            detail: self.lines.join("; "),
            elapsed: start.elapsed(),
        }
    }
}

fn base(lambda: f64) -> SystemParams {
    SystemParams::from_db(100, 64, 6.0, 6.0, lambda).expect("valid base parameters")
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

/// Closed-form thresholds at M=100, L=64, gamma=Gamma=6 dB (lambda=20).
pub fn closed_form() -> CriterionReport {
    let start = Instant::now();
    let p = base(20.0);
    let mut c = Checks::new();
    let kg = k_gamma(&p).floor();
    c.check(kg == 20.0, format!("floor(K_threshold)={kg}"));
    let (eta_con, _) = max_conventional_throughput(&p);
    c.check(
        within(eta_con, 13.13, 0.02),
        format!("max conventional throughput={eta_con:.4}"),
    );
    let eta_irt = max_irt_throughput(&p);
    c.check(
        within(eta_irt, 20.07, 0.02),
        format!("max IRT throughput={eta_irt:.4}"),
    );
    let lb = effective_arrival_rate(20.0, 64);
    c.check(within(lb, 14.63, 0.005), format!("effective rate={lb:.5}"));
    let gamma_bound = linear_to_db(crate::analytic::threshold_stability_bound(&p));
    c.check(
        within(gamma_bound, 7.37, 0.02),
        format!("threshold bound={gamma_bound:.4} dB"),
    );
    let m_bound = antenna_stability_bound(&p);
    c.check(
        within(m_bound, 72.88, 0.05),
        format!("antenna bound={m_bound:.4}"),
    );
    let raw_bound = p.arrival_rate * p.threshold * p.b1();
    c.check(
        within(raw_bound, 99.62, 0.05),
        format!("raw-load bound={raw_bound:.4}"),
    );
    let elapsed = start.elapsed();
    c.check(
        elapsed < Duration::from_secs(1),
        format!("runtime {:.3} s < 1 s", elapsed.as_secs_f64()),
    );
    c.finish("1", "closed-form values", start)
}

/// Empirical mean of the realized SINR over `draws` channel draws, and the
/// ratio of mean signal power to mean interference power.
pub fn sinr_sample_statistics(k: usize, m: u32, snr: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed);
    let (mut sum_sinr, mut sum_sig, mut sum_int) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let channels = draw_channels(k, m as usize, &mut rng);
        let (signal, interference) = sinr_terms(0, &channels, snr).expect("non-zero channel");
        sum_sinr += signal / interference;
        sum_sig += signal;
        sum_int += interference;
    }
    (sum_sinr / draws as f64, sum_sig / sum_int)
}

/// Sample-mean SINR against the mean-SINR approximation at M=100,
/// gamma=10 dB.
pub fn sinr_mean(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let params = SystemParams::from_db(100, 64, 10.0, 6.0, 1.0).expect("valid parameters");
    let mut c = Checks::new();
    for (i, k) in [5usize, 10, 20, 40, 80].into_iter().enumerate() {
        let approx = mean_sinr_approx(k as u64, 0, &params).expect("positive denominator");
        let (mean, ratio) = sinr_sample_statistics(
            k,
            100,
            params.snr,
            10_000,
            derive_seed(seed, &[2, i as u64]),
        );
        let err = (mean - approx).abs() / approx;
        c.check(
            err <= 0.05,
            format!(
                "K={k} sample mean {mean:.4} vs {approx:.4} ({:+.1}%, power ratio {:+.1}%)",
                100.0 * (mean - approx) / approx,
                100.0 * (ratio - approx) / approx
            ),
        );
    }
    let elapsed = start.elapsed();
    c.check(
        elapsed < Duration::from_secs(120),
        format!("runtime {:.1} s < 120 s", elapsed.as_secs_f64()),
    );
    c.finish("2", "SINR sample mean vs approximation", start)
}

fn trial(mode: Mode, params: &SystemParams, slots: u64, seed: u64) -> MetricsAccumulator {
    run_trial(
        mode,
        params,
        &ProtocolConfig::default(),
        slots,
        default_warmup(slots),
        seed,
    )
    .expect("valid trial")
}

/// Simulated throughput of both systems against the closed forms.
pub fn throughput(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    for (i, lambda) in [5.0, 10.0, 15.0, 20.0].into_iter().enumerate() {
        let p = base(lambda);
        let irt = trial(Mode::Irt, &p, 100_000, derive_seed(seed, &[3, i as u64, 1]));
        let target = effective_arrival_rate(lambda, 64);
        let err = (irt.throughput.mean - target).abs() / target;
        c.check(
            err <= 0.02 && !irt.unstable_flag,
            format!(
                "IRT lambda={lambda}: {:.3} vs {target:.3} ({:.2}%)",
                irt.throughput.mean,
                100.0 * err
            ),
        );
        let con = trial(
            Mode::Conventional,
            &p,
            100_000,
            derive_seed(seed, &[3, i as u64, 0]),
        );
        let closed = conventional_throughput(lambda, &p);
        let widths = (con.throughput.mean - closed).abs() / con.throughput.half_width;
        c.check(
            widths <= 3.0,
            format!(
                "conventional lambda={lambda}: {:.3}±{:.3} vs {closed:.3} ({widths:.1} half-widths)",
                con.throughput.mean, con.throughput.half_width
            ),
        );
    }
    let elapsed = start.elapsed();
    c.check(
        elapsed < Duration::from_secs(600),
        format!("runtime {:.1} s < 600 s", elapsed.as_secs_f64()),
    );
    c.finish("3", "simulated throughput", start)
}

/// IRT stability over M at lambda=20; the frontier is the midpoint between the
/// largest unstable M and the smallest stable M.
pub fn stability_frontier(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    let bound = antenna_stability_bound(&base(20.0));
    let mut outcomes = Vec::new();
    for (i, m) in [60u32, 70, 75, 80, 100].into_iter().enumerate() {
        let p = base(20.0).with_antennas(m);
        let r = trial(Mode::Irt, &p, 100_000, derive_seed(seed, &[4, i as u64]));
        let stable = !r.unstable_flag && r.mean_retx.mean.is_finite();
        if m >= 80 {
            c.check(stable, format!("M={m} stable, tau={:.3}", r.mean_retx.mean));
        } else if m <= 70 {
            c.check(
                r.unstable_flag,
                format!("M={m} tripped={}", r.unstable_flag),
            );
        } else {
            c.lines.push(format!(
                "M={m} {}",
                if stable { "stable" } else { "tripped" }
            ));
        }
        outcomes.push((m, stable));
    }
    let last_unstable = outcomes.iter().filter(|o| !o.1).map(|o| o.0).max();
    let first_stable = outcomes.iter().filter(|o| o.1).map(|o| o.0).min();
    match (last_unstable, first_stable) {
        (Some(u), Some(s)) if u < s => {
            let frontier = 0.5 * f64::from(u + s);
            c.check(
                (frontier - bound).abs() <= 0.1 * bound,
                format!("frontier {frontier} vs {bound:.2} (±10%)"),
            );
        }
        _ => c.check(false, "no monotone stability frontier".into()),
    }
    c.finish("4", "stability frontier", start)
}

/// Chain and protocol-level mean packets in service against the stationary
/// bounds at the base point with lambda=20.
pub fn pis_sandwich(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    let p = base(20.0);
    let bounds = mean_pis_bounds(&p).expect("base point is stable");
    let inside = |x: f64| x >= bounds.lower && x <= bounds.upper;
    let chain = estimate_stationary_mean(&p, 1_000_000, 10_000, derive_seed(seed, &[5, 0]));
    match chain {
        Ok(e) => c.check(
            inside(e.mean),
            format!(
                "chain mean {:.3}±{:.3} in [{:.2}, {:.2}]",
                e.mean, e.half_width, bounds.lower, bounds.upper
            ),
        ),
        Err(e) => c.check(false, format!("chain failed: {e}")),
    }
    let sim = trial(Mode::Irt, &p, 100_000, derive_seed(seed, &[5, 1]));
    c.check(
        inside(sim.mean_in_service.mean) && !sim.unstable_flag,
        format!(
            "protocol mean in service {:.3}±{:.3}",
            sim.mean_in_service.mean, sim.mean_in_service.half_width
        ),
    );
    c.finish("5", "packets-in-service sandwich", start)
}

fn random_params(rng: &mut SimRng) -> SystemParams {
    let m = rng.random_range(10..=400u32);
    let l = rng.random_range(4..=256u32);
    let snr_db = rng.random_range(-5.0..15.0);
    let threshold_db = rng.random_range(-5.0..12.0);
    let lambda = rng.random_range(0.1..(2.0 * f64::from(l)));
    SystemParams::from_db(m, l, snr_db, threshold_db, lambda).expect("valid random parameters")
}

/// Smallest q meeting the threshold, searched upward from `from`; the caller
/// passes the previous concurrency's q, and minimality is checked at q-1.
fn brute_force_q(k: u64, p: &SystemParams, from: u64) -> Option<u64> {
    let meets = |q: u64| {
        mean_sinr_approx(k, q, p)
            .map(|s| s >= p.threshold)
            .unwrap_or(false)
    };
    let q = (from..).find(|&q| meets(q))?;
    (q == 0 || !meets(q - 1)).then_some(q)
}

/// Randomised property checks over the analytic and simulation layers.
pub fn properties(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = stream(derive_seed(seed, &[6]));

    // Throughput ordering between the two systems.
    let (mut sets, mut violations) = (0, 0);
    while sets < 1000 {
        let p = random_params(&mut rng);
        if !irt_stable(&p) {
            continue;
        }
        sets += 1;
        let (eta_con, _) = max_conventional_throughput(&p);
        if max_irt_throughput(&p) + 1e-9 < eta_con {
            violations += 1;
        }
    }
    c.check(
        violations == 0,
        format!("ordering: {violations}/{sets} violations"),
    );

    // Minimum re-transmission count against a search oracle.
    let mut q_sets = vec![base(20.0)];
    q_sets.extend((0..4).map(|_| random_params(&mut rng)));
    let mut mismatches = 0;
    for p in &q_sets {
        let mut prev = 0;
        for k in 1..=10_000u64 {
            let expected = brute_force_q(k, p, prev);
            let got = q_gamma(k, p);
            if expected != Some(got) {
                mismatches += 1;
            }
            prev = expected.unwrap_or(got);
        }
    }
    c.check(
        mismatches == 0,
        format!(
            "q search: {mismatches} mismatches over {} sets x 10^4",
            q_sets.len()
        ),
    );

    // Sufficient conditions imply stability.
    let (mut hits_l, mut hits_lambda, mut bad) = (0, 0, 0);
    for _ in 0..20_000 {
        let p = random_params(&mut rng);
        let (cond_l, cond_lambda) = sufficient_conditions(&p);
        hits_l += usize::from(cond_l);
        hits_lambda += usize::from(cond_lambda);
        if (cond_l || cond_lambda) && !irt_stable(&p) {
            bad += 1;
        }
    }
    c.check(
        bad == 0 && hits_l > 0 && hits_lambda > 0,
        format!("sufficient conditions: {bad} violations ({hits_l} preamble hits, {hits_lambda} load hits)"),
    );

    // Negative drift beyond a finite point exactly for stable systems. Sets
    // are kept when the drift's linear crossing is well inside the scan.
    let (mut scanned, mut disagreements) = (0, 0);
    while scanned < 2000 {
        let p = random_params(&mut rng);
        let lambda_bar = effective_arrival_rate(p.arrival_rate, p.preambles);
        let load = lambda_bar * p.threshold * p.b1() / p.m();
        let margin = lambda_bar * (1.0 + p.threshold * p.b0().abs() / p.m()) / (1.0 - load).abs();
        if !(margin < 5_000.0) {
            continue;
        }
        scanned += 1;
        let negative_tail = negative_drift_threshold(&p, 10_000).is_some_and(|k| k < 10_000);
        if negative_tail != irt_stable(&p) {
            disagreements += 1;
        }
    }
    c.check(
        disagreements == 0,
        format!("drift: {disagreements}/{scanned} disagreements"),
    );
    c.lines.push(format!(
        "drift at base k=100: {:.2}",
        drift_diagnostic(100, &base(20.0))
    ));

    // Flow conservation and Little's law on stable simulated runs.
    let (mut runs, mut flow_bad, mut little_bad, mut worst) = (0, 0, 0, 0.0f64);
    let mut run = 0u64;
    while runs < 24 {
        let m = rng.random_range(60..=200u32);
        let l = [32u32, 64, 128][rng.random_range(0..3)];
        let threshold_db = rng.random_range(2.0..8.0);
        let lambda = rng.random_range(1.0..25.0);
        let p = SystemParams::from_db(m, l, 6.0, threshold_db, lambda).expect("valid parameters");
        // Keep a safety margin from the frontier so runs stay short.
        if antenna_stability_bound(&p) > 0.85 * p.m() {
            continue;
        }
        for mode in [Mode::Conventional, Mode::Irt] {
            run += 1;
            let r = trial(mode, &p, 20_000, derive_seed(seed, &[6, 1, run]));
            if r.unstable_flag {
                continue;
            }
            runs += 1;
            if !(r.totals.is_conserved() && r.flow_conserved(lambda)) {
                flow_bad += 1;
            }
            let gap = r.littles_law_gap();
            worst = worst.max(gap);
            if gap > 0.03 {
                little_bad += 1;
            }
        }
    }
    c.check(flow_bad == 0, format!("flow: {flow_bad}/{runs} runs off"));
    c.check(
        little_bad == 0,
        format!(
            "Little: {little_bad}/{runs} runs above 3%, worst {:.3}%",
            100.0 * worst
        ),
    );
    c.finish("6", "property suites", start)
}

/// Re-running an experiment with the same master seed reproduces its CSV.
pub fn determinism(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    let configs = [
        ExperimentConfig {
            mode: RunMode::Both,
            from: 5.0,
            to: 25.0,
            step: 10.0,
            slots: 5_000,
            trials: 2,
            master_seed: seed,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            mode: RunMode::Chain,
            sweep: SweepAxis::Antennas,
            from: 60.0,
            to: 100.0,
            step: 20.0,
            slots: 20_000,
            master_seed: seed,
            ..ExperimentConfig::default()
        },
    ];
    for config in configs {
        let first = run_experiment(&config).map(|t| t.to_csv());
        let parallel = run_experiment(&ExperimentConfig {
            jobs: 2,
            ..config.clone()
        })
        .map(|t| t.to_csv());
        let again = run_experiment(&config).map(|t| t.to_csv());
        match (first, parallel, again) {
            (Ok(a), Ok(b), Ok(d)) => c.check(
                a == b && a == d,
                format!(
                    "{:?} sweep: {} bytes identical across 3 runs",
                    config.mode,
                    a.len()
                ),
            ),
            (a, b, d) => c.check(
                false,
                format!("experiment failed: {:?}", [a.err(), b.err(), d.err()]),
            ),
        }
    }
    c.finish("7", "determinism", start)
}

fn strictly_increasing(xs: &[Estimate]) -> bool {
    xs.windows(2).all(|w| w[1].mean > w[0].mean)
}

fn means(xs: &[Estimate]) -> String {
    let parts: Vec<String> = xs.iter().map(|e| format!("{:.3}", e.mean)).collect();
    parts.join(" < ")
}

/// Monotone trends: tau grows with load, threshold and preamble count; the
/// conventional throughput stops growing once L is large.
pub fn shape_checks(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    let slots = 30_000;
    let tau_over = |tag: u64, sets: Vec<SystemParams>| -> Vec<Estimate> {
        sets.iter()
            .enumerate()
            .map(|(i, p)| {
                trial(Mode::Irt, p, slots, derive_seed(seed, &[8, tag, i as u64])).mean_retx
            })
            .collect()
    };

    let by_lambda = tau_over(0, [5.0, 10.0, 15.0, 20.0].map(base).to_vec());
    c.check(
        strictly_increasing(&by_lambda),
        format!("tau vs lambda: {}", means(&by_lambda)),
    );
    let by_threshold = tau_over(
        1,
        [3.0, 5.0, 7.0]
            .map(|g| SystemParams::from_db(100, 64, 6.0, g, 20.0).expect("valid"))
            .to_vec(),
    );
    c.check(
        strictly_increasing(&by_threshold),
        format!("tau vs threshold: {}", means(&by_threshold)),
    );
    let by_l = tau_over(
        2,
        [16u32, 64, 256]
            .map(|l| base(20.0).with_preambles(l))
            .to_vec(),
    );
    c.check(
        strictly_increasing(&by_l),
        format!("tau vs L: {}", means(&by_l)),
    );

    let ls = [8u32, 16, 32, 64, 128, 256];
    let con: Vec<Estimate> = ls
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let p = base(20.0).with_preambles(l);
            trial(
                Mode::Conventional,
                &p,
                slots,
                derive_seed(seed, &[8, 3, i as u64]),
            )
            .throughput
        })
        .collect();
    let rises = con[1].mean > con[0].mean;
    let flat_tail = con[3..]
        .windows(2)
        .all(|w| w[1].mean - w[0].mean <= 3.0 * (w[0].half_width + w[1].half_width));
    let parts: Vec<String> = con
        .iter()
        .zip(ls)
        .map(|(e, l)| format!("L={l}:{:.2}", e.mean))
        .collect();
    c.check(
        rises && flat_tail,
        format!("conventional throughput vs L: {}", parts.join(" ")),
    );
    c.finish("shape", "qualitative trends", start)
}

/// Every criterion in order.
pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    vec![
        closed_form(),
        sinr_mean(seed),
        throughput(seed),
        stability_frontier(seed),
        pis_sandwich(seed),
        properties(seed),
        determinism(seed),
        shape_checks(seed),
    ]
}
