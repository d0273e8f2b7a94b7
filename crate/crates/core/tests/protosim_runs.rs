use gfra_core::analytic::{effective_arrival_rate, tau_pis};
use gfra_core::chanmodel::{assign_preambles, draw_channels, realized_sinr};
use gfra_core::protosim::{measure_tau, run_trial, Mode, ProtocolConfig};
use gfra_core::rng::stream;
use gfra_core::stats::batch_mean;
use gfra_core::{Error, SystemParams};
use rand_distr::{Distribution, Poisson};

fn base(lambda: f64) -> SystemParams {
    SystemParams::from_db(100, 64, 6.0, 6.0, lambda).unwrap()
}

#[test]
fn irt_throughput_equals_effective_rate() {
    let r = run_trial(
        Mode::Irt,
        &base(20.0),
        &ProtocolConfig::default(),
        100_000,
        10_000,
        7,
    )
    .unwrap();
    assert!(!r.unstable_flag);
    assert!(
        (r.throughput.mean - 14.63).abs() <= 0.15,
        "{:?}",
        r.throughput
    );
    assert!(r.flow_conserved(20.0));
    assert!(r.littles_law_gap() <= 0.03);
}

#[test]
fn tau_at_light_load_is_one() {
    let tau = measure_tau(&base(0.1), &ProtocolConfig::default(), 50_000, 1000, 3).unwrap();
    assert!((tau.mean - 1.0).abs() <= 0.01, "{tau:?}");
}

#[test]
fn tau_within_analytic_range_and_increasing_in_load() {
    let upper = tau_pis(&base(20.0)).unwrap().upper;
    assert!((upper - 3.550).abs() < 1e-3);
    let taus: Vec<f64> = [10.0, 15.0, 20.0]
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            measure_tau(
                &base(lambda),
                &ProtocolConfig::default(),
                40_000,
                4000,
                11 + i as u64,
            )
            .unwrap()
            .mean
        })
        .collect();
    assert!(taus.windows(2).all(|w| w[1] > w[0]), "{taus:?}");
    assert!((1.0..=upper).contains(&taus[2]), "{taus:?}");
}

#[test]
fn overload_trips_watchdog() {
    // Effective rate 21.4 exceeds M / (Gamma b1) = 20.07.
    let p = base(40.0);
    assert!(effective_arrival_rate(40.0, 64) > 20.07);
    let r = run_trial(Mode::Irt, &p, &ProtocolConfig::default(), 100_000, 1000, 5).unwrap();
    assert!(r.unstable_flag);
    assert!(r.measured_slots < 99_000);
    assert!(matches!(
        measure_tau(&p, &ProtocolConfig::default(), 100_000, 1000, 5),
        Err(Error::UnstableSystem { .. })
    ));
}

/// Decoded packets per slot from independent slot draws: Poisson arrivals,
/// uniform preambles, then the realized SINR of each PC-free device.
fn conventional_oracle(p: &SystemParams, slots: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed);
    let poisson = Poisson::new(p.arrival_rate).unwrap();
    let mut decoded = Vec::with_capacity(slots);
    for _ in 0..slots {
        let k = poisson.sample(&mut rng) as usize;
        let n = assign_preambles(k, p.preambles, &mut rng).pc_free.len();
        let channels = draw_channels(n, p.antennas as usize, &mut rng);
        let ok = (0..n)
            .filter(|&i| realized_sinr(i, &channels, p.snr).unwrap().value >= p.threshold)
            .count();
        decoded.push(ok as f64);
    }
    let e = batch_mean(&decoded);
    (e.mean, e.half_width)
}

#[test]
fn conventional_matches_slotwise_oracle() {
    for (i, lambda) in [10.0, 20.0].into_iter().enumerate() {
        let p = base(lambda);
        let sim = run_trial(
            Mode::Conventional,
            &p,
            &ProtocolConfig::default(),
            60_000,
            1000,
            40 + i as u64,
        )
        .unwrap();
        let (oracle, oracle_hw) = conventional_oracle(&p, 30_000, 90 + i as u64);
        let tol = 3.0 * (sim.throughput.half_width.powi(2) + oracle_hw.powi(2)).sqrt();
        assert!(
            (sim.throughput.mean - oracle).abs() <= tol,
            "lambda={lambda}: sim {:?} oracle {oracle}±{oracle_hw}",
            sim.throughput
        );
        assert!(sim.flow_conserved(lambda));
        assert!(sim.littles_law_gap() <= 0.03);
    }
}

#[test]
fn irt_throughput_flat_in_threshold_below_bound() {
    for (i, g) in [2.0, 4.0, 6.0].into_iter().enumerate() {
        let p = SystemParams::from_db(100, 64, 6.0, g, 20.0).unwrap();
        let r = run_trial(
            Mode::Irt,
            &p,
            &ProtocolConfig::default(),
            30_000,
            3000,
            60 + i as u64,
        )
        .unwrap();
        assert!(
            r.throughput.contains(14.632, 3.0),
            "Gamma={g} dB: {:?}",
            r.throughput
        );
    }
}

#[test]
fn disabling_type1_feedback_adds_interference() {
    let p = base(20.0);
    let on = run_trial(
        Mode::Conventional,
        &p,
        &ProtocolConfig::default(),
        20_000,
        1000,
        8,
    )
    .unwrap();
    let off_cfg = ProtocolConfig {
        type1_feedback: false,
        ..ProtocolConfig::default()
    };
    let off = run_trial(Mode::Conventional, &p, &off_cfg, 20_000, 1000, 8).unwrap();
    assert!(off.throughput.mean < on.throughput.mean);
    assert!(off.totals.is_conserved());
}
