use gfra_core::analytic::{
    collision_probability, conventional_throughput, effective_arrival_rate, irt_stable,
    max_irt_throughput, mean_pis_bounds, mean_sinr_approx, sufficient_conditions, tau_pis,
};
use gfra_core::chanmodel::{draw_channels, realized_sinr, ChannelVector};
use gfra_core::protosim::{Mode, ProtocolConfig, Simulator};
use gfra_core::queuedyn::{drift_diagnostic, q_gamma};
use gfra_core::rng::stream;
use gfra_core::SystemParams;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::E;

fn params() -> impl Strategy<Value = SystemParams> {
    (
        1u32..=400,
        1u32..=256,
        -5.0f64..15.0,
        -5.0f64..12.0,
        0.0f64..300.0,
    )
        .prop_map(|(m, l, snr_db, threshold_db, lambda)| {
            SystemParams::from_db(m, l, snr_db, threshold_db, lambda).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn effective_rate_bounded(p in params()) {
        let lb = effective_arrival_rate(p.arrival_rate, p.preambles);
        prop_assert!(lb <= p.arrival_rate + 1e-12);
        prop_assert!(lb <= p.l() / E + 1e-12);
        prop_assert!(conventional_throughput(p.arrival_rate, &p) <= lb + 1e-12);
        prop_assert!(max_irt_throughput(&p) <= p.l() / E + 1e-12);
    }

    #[test]
    fn collision_probability_in_unit_interval(k in 1u64..10_000, l in 1u32..1024) {
        let pc = collision_probability(k, l);
        prop_assert!((0.0..=1.0).contains(&pc));
    }

    #[test]
    fn mean_sinr_monotone(p in params(), k in 1u64..2000, q in 0u64..50) {
        let s = mean_sinr_approx(k, q, &p).unwrap();
        prop_assert!(mean_sinr_approx(k + 1, q, &p).unwrap() < s);
        prop_assert!(mean_sinr_approx(k, q + 1, &p).unwrap() > s);
        prop_assert!(mean_sinr_approx(k, q, &p.with_antennas(p.antennas + 1)).unwrap() > s);
    }

    #[test]
    fn sufficient_conditions_imply_stability(p in params()) {
        let (cond_l, cond_lambda) = sufficient_conditions(&p);
        prop_assert!(!(cond_l || cond_lambda) || irt_stable(&p));
    }

    #[test]
    fn stable_bounds_ordered(p in params()) {
        prop_assume!(irt_stable(&p));
        let b = mean_pis_bounds(&p).unwrap();
        prop_assert!(b.lower <= b.approx && b.approx <= b.upper);
        let t = tau_pis(&p).unwrap();
        prop_assert!(1.0 <= t.approx && t.approx <= t.upper);
    }

    #[test]
    fn q_gamma_threshold_consistent(p in params(), k in 1u64..10_000) {
        let q = q_gamma(k, &p);
        prop_assert!(mean_sinr_approx(k, q, &p).unwrap() >= p.threshold);
        if q >= 1 {
            prop_assert!(mean_sinr_approx(k, q - 1, &p).unwrap() < p.threshold);
        }
        prop_assert!(q_gamma(k + 1, &p) >= q);
        prop_assert!(q_gamma(k, &p.with_antennas(p.antennas + 1)) <= q);
    }

    #[test]
    fn drift_at_zero_is_upward(p in params()) {
        prop_assert!(drift_diagnostic(0, &p) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinr_non_negative_and_finite(k in 1usize..20, m in 1usize..64, snr_db in -10.0f64..20.0, seed: u64) {
        let channels = draw_channels(k, m, &mut stream(seed));
        let s = realized_sinr(0, &channels, 10f64.powf(snr_db / 10.0)).unwrap();
        prop_assert!(s.value >= 0.0 && s.value.is_finite());
        prop_assert_eq!(s.concurrent, k);
    }

    #[test]
    fn sinr_invariant_under_phase_rotation(k in 1usize..8, m in 1usize..32, theta in 0.0f64..6.3, seed: u64) {
        let channels = draw_channels(k, m, &mut stream(seed));
        let rot = Complex64::from_polar(1.0, theta);
        let rotated: Vec<ChannelVector> = channels
            .iter()
            .map(|v| ChannelVector::new(v.entries().iter().map(|z| z * rot).collect()))
            .collect();
        let a = realized_sinr(0, &channels, 4.0).unwrap().value;
        let b = realized_sinr(0, &rotated, 4.0).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn slot_ledgers_conserve_packets(
        m in 20u32..150,
        l in 2u32..64,
        threshold_db in 0.0f64..10.0,
        lambda in 0.0f64..30.0,
        irt: bool,
        seed: u64,
    ) {
        let p = SystemParams::from_db(m, l, 6.0, threshold_db, lambda).unwrap();
        let mode = if irt { Mode::Irt } else { Mode::Conventional };
        let mut sim = Simulator::new(mode, p, ProtocolConfig::default(), seed).unwrap();
        let mut previous_acc = std::collections::HashMap::new();
        for _ in 0..200 {
            let s = sim.run_slot().unwrap();
            prop_assert_eq!(s.arrivals + s.pc_drops, s.raw_arrivals);
            match mode {
                Mode::Irt => prop_assert_eq!(s.sinr_drops, 0),
                Mode::Conventional => {
                    prop_assert_eq!(s.in_service, s.arrivals);
                    prop_assert_eq!(s.decoded + s.sinr_drops, s.arrivals);
                    prop_assert!(sim.state().is_empty());
                }
            }
            for d in sim.state() {
                if let Some(&(q, acc)) = previous_acc.get(&d.id) {
                    prop_assert_eq!(d.q, q + 1);
                    prop_assert!(d.accumulated_sinr >= acc);
                }
            }
            previous_acc = sim.state().iter().map(|d| (d.id, (d.q, d.accumulated_sinr))).collect();
            if sim.is_unstable() {
                break;
            }
        }
        prop_assert!(sim.totals().is_conserved());
    }
}
