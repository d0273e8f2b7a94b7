//! The scalar PiS recursion
//!
//! ```text
//! K(t) = A(t) + sum_{q=1}^{Q(K(t-1))} A(t-q),   A(t) ~ Poisson(lambda_bar)
//! ```
//!
//! where `Q(K)` is the number of re-transmissions the mean-SINR model needs
//! at concurrency `K`. This is the tractable abstraction of the IRT system;
//! it is simulated directly and its drift is evaluated exactly.

use rand_distr::{Distribution, Poisson};

use crate::analytic::{antenna_stability_bound, effective_arrival_rate, irt_stable};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::rng::{stream, SimRng};
use crate::stats::{batch_mean, Estimate};

/// Minimum number of re-transmissions for the mean SINR to reach the
/// threshold: `max(0, ceil(Gamma (K b1 + b0) / M - 1))`.
pub fn q_gamma(k: u64, params: &SystemParams) -> u64 {
    let x = params.threshold * (k as f64 * params.b1() + params.b0()) / params.m() - 1.0;
    let q = x.ceil();
    if q <= 0.0 {
        0
    } else {
        q as u64
    }
}

/// Exact conditional drift `E[K(t) | K(t-1) = k] - k = lambda_bar (1 + Q(k)) - k`.
pub fn drift_diagnostic(k: u64, params: &SystemParams) -> f64 {
    let lambda_bar = effective_arrival_rate(params.arrival_rate, params.preambles);
    lambda_bar * (1 + q_gamma(k, params)) as f64 - k as f64
}

/// Smallest `k*` such that the drift is negative for every `k` in
/// `[k*, k_max]`, or `None` if the drift at `k_max` is not negative.
pub fn negative_drift_threshold(params: &SystemParams, k_max: u64) -> Option<u64> {
    let mut k_star = None;
    for k in (0..=k_max).rev() {
        if drift_diagnostic(k, params) < 0.0 {
            k_star = Some(k);
        } else {
            break;
        }
    }
    k_star
}

/// Past arrivals `A(t-1), A(t-2), ...` in a power-of-two ring buffer.
/// Slots before the start of the run read as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalWindow {
    buf: Vec<u64>,
    head: usize,
}

impl ArrivalWindow {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            buf: vec![0; capacity.max(1).next_power_of_two()],
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    /// `A(t-1-i)`.
    pub fn get(&self, i: usize) -> u64 {
        debug_assert!(i < self.buf.len());
        self.buf[(self.head + i) & (self.buf.len() - 1)]
    }

    /// `sum_{q=1}^{n} A(t-q)`.
    pub fn sum_recent(&self, n: usize) -> u64 {
        (0..n).map(|i| self.get(i)).sum()
    }

    pub fn push(&mut self, a: u64) {
        let mask = self.buf.len() - 1;
        self.head = (self.head + mask) & mask;
        self.buf[self.head] = a;
    }

    /// Doubles the capacity until it holds `n` entries, keeping order.
    pub fn ensure(&mut self, n: usize) {
        if n <= self.buf.len() {
            return;
        }
        let mut grown = Self::with_capacity(n);
        for i in (0..self.buf.len()).rev() {
            grown.push(self.get(i));
        }
        *self = grown;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub k_bar: u64,
    pub window: ArrivalWindow,
}

/// Direct simulation of the recursion.
#[derive(Debug, Clone)]
pub struct Chain {
    params: SystemParams,
    arrivals: Option<Poisson<f64>>,
    ceiling: u64,
    state: ChainState,
    last_arrivals: u64,
}

impl Chain {
    /// Starts empty. `ceiling` bounds `K(t)`; beyond it the chain is declared
    /// divergent. The window is sized for the largest `Q` below the ceiling.
    pub fn new(params: SystemParams, ceiling: u64) -> Result<Self> {
        params.validate()?;
        let lambda_bar = effective_arrival_rate(params.arrival_rate, params.preambles);
        let arrivals = if lambda_bar > 0.0 {
            Some(Poisson::new(lambda_bar).map_err(|e| {
                Error::InvalidParams(format!("PC-free arrival rate {lambda_bar}: {e}"))
            })?)
        } else {
            None
        };
        let window = ArrivalWindow::with_capacity(q_gamma(ceiling, &params) as usize + 1);
        Ok(Self {
            params,
            arrivals,
            ceiling,
            state: ChainState { k_bar: 0, window },
            last_arrivals: 0,
        })
    }

    /// Default ceiling `100 * max(lambda_bar, 1)`, matching the simulator.
    pub fn default_ceiling(params: &SystemParams) -> u64 {
        let lambda_bar = effective_arrival_rate(params.arrival_rate, params.preambles);
        (100.0 * lambda_bar.max(1.0)).ceil() as u64
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// `A(t)` of the most recent step.
    pub fn last_arrivals(&self) -> u64 {
        self.last_arrivals
    }

    /// Advances one slot and returns the new `K(t)`.
    pub fn step(&mut self, rng: &mut SimRng) -> Result<u64> {
        let a = match &self.arrivals {
            Some(d) => d.sample(rng) as u64,
            None => 0,
        };
        let q = q_gamma(self.state.k_bar, &self.params) as usize;
        self.state.window.ensure(q);
        let k = a + self.state.window.sum_recent(q);
        self.state.window.push(a);
        self.state.k_bar = k;
        self.last_arrivals = a;
        if k > self.ceiling {
            return Err(Error::UnstableSystem {
                m: self.params.m(),
                bound: antenna_stability_bound(&self.params),
            });
        }
        Ok(k)
    }
}

/// One step of the recursion from `state`.
pub fn step_chain(
    state: &ChainState,
    params: &SystemParams,
    rng: &mut SimRng,
) -> Result<ChainState> {
    let mut chain = Chain::new(*params, Chain::default_ceiling(params))?;
    chain.state = state.clone();
    chain.step(rng)?;
    Ok(chain.state)
}

/// Time average of `K(t)` after `burn_in` steps, with a batch-means 95%
/// half-width.
pub fn estimate_stationary_mean(
    params: &SystemParams,
    steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Estimate> {
    if !irt_stable(params) {
        return Err(Error::UnstableSystem {
            m: params.m(),
            bound: antenna_stability_bound(params),
        });
    }
    if steps <= burn_in {
        return Err(Error::InvalidInput(format!(
            "steps ({steps}) must exceed burn-in ({burn_in})"
        )));
    }
    let mut chain = Chain::new(*params, Chain::default_ceiling(params))?;
    let mut rng = stream(seed);
    let mut trace = Vec::with_capacity((steps - burn_in) as usize);
    for t in 0..steps {
        let k = chain.step(&mut rng)?;
        if t >= burn_in {
            trace.push(k as f64);
        }
    }
    Ok(batch_mean(&trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{k_gamma, mean_pis_bounds, mean_sinr_approx, tau_pis};

    fn base(lambda: f64) -> SystemParams {
        SystemParams::from_db(100, 64, 6.0, 6.0, lambda).unwrap()
    }

    /// Smallest q with (q+1) M / (K b1 + b0) >= Gamma, by search.
    fn brute_force_q(k: u64, p: &SystemParams) -> u64 {
        let denom = k as f64 * p.b1() + p.b0();
        (0..)
            .find(|&q| (q + 1) as f64 * p.m() / denom >= p.threshold)
            .unwrap()
    }

    #[test]
    fn q_gamma_examples() {
        let p = base(20.0);
        let kg = k_gamma(&p).floor() as u64;
        assert_eq!(kg, 20);
        for k in 0..=kg {
            assert_eq!(q_gamma(k, &p), 0);
        }
        assert_eq!(q_gamma(21, &p), 1);
        assert!(mean_sinr_approx(21, 0, &p).unwrap() < p.threshold);
        assert!(mean_sinr_approx(21, 1, &p).unwrap() >= p.threshold);
    }

    #[test]
    fn q_gamma_matches_search() {
        for (m, g_db) in [(100u32, 6.0), (60, 3.0), (250, 10.0), (8, 0.0)] {
            let p = SystemParams::from_db(m, 64, 6.0, g_db, 0.0).unwrap();
            for k in 1..=500 {
                assert_eq!(q_gamma(k, &p), brute_force_q(k, &p), "m={m} k={k}");
            }
        }
    }

    #[test]
    fn q_gamma_monotone() {
        let p = base(20.0);
        for k in 0..2000 {
            assert!(q_gamma(k + 1, &p) >= q_gamma(k, &p));
            assert!(q_gamma(k, &p.with_antennas(101)) <= q_gamma(k, &p));
        }
    }

    #[test]
    fn window_ring_and_growth() {
        let mut w = ArrivalWindow::with_capacity(3);
        assert_eq!(w.capacity(), 4);
        for a in 1..=6 {
            w.push(a);
        }
        assert_eq!((w.get(0), w.get(1), w.get(3)), (6, 5, 3));
        assert_eq!(w.sum_recent(2), 11);
        w.ensure(9);
        assert_eq!(w.capacity(), 16);
        assert_eq!((w.get(0), w.get(3), w.get(4)), (6, 3, 0));
        w.push(7);
        assert_eq!(w.sum_recent(5), 7 + 6 + 5 + 4 + 3);
    }

    #[test]
    fn empty_chain_stays_empty() {
        let mut chain = Chain::new(base(0.0), 100).unwrap();
        let mut rng = stream(1);
        for _ in 0..1000 {
            assert_eq!(chain.step(&mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn light_load_chain_is_iid_arrivals() {
        let p = base(5.0).with_antennas(10_000);
        let mut chain = Chain::new(p, 10_000).unwrap();
        let mut rng = stream(2);
        for _ in 0..5000 {
            let k = chain.step(&mut rng).unwrap();
            assert_eq!(k, chain.last_arrivals());
        }
    }

    #[test]
    fn step_chain_uses_shared_window() {
        let p = base(20.0);
        let mut window = ArrivalWindow::with_capacity(4);
        for a in [10, 20, 30] {
            window.push(a);
        }
        // Q(30) = 1: the newest past arrival (30) is carried.
        assert_eq!(q_gamma(30, &p), 1);
        let state = ChainState { k_bar: 30, window };
        let mut rng = stream(3);
        let next = step_chain(&state, &p, &mut rng).unwrap();
        let a = next.window.get(0);
        assert_eq!(next.k_bar, a + 30);
        assert_eq!(next.window.get(1), 30);
    }

    #[test]
    fn drift_examples() {
        let p = base(20.0);
        assert!(drift_diagnostic(0, &p) >= 0.0);
        let k_star = negative_drift_threshold(&p, 10_000).expect("stable params have k*");
        assert!(k_star > 0 && k_star < 200, "{k_star}");
        let unstable = p.with_antennas(60);
        let rho = antenna_stability_bound(&unstable) / 60.0;
        assert!((rho - 1.215).abs() < 0.001);
        assert!(negative_drift_threshold(&unstable, 10_000).is_none());
        assert!((200..10_000).all(|k| drift_diagnostic(k, &unstable) > 0.0));
    }

    #[test]
    fn drift_is_affine_up_to_ceiling_step() {
        for (m, lam) in [(100u32, 20.0), (60, 20.0), (200, 40.0)] {
            let p = base(lam).with_antennas(m);
            let lb = effective_arrival_rate(lam, 64);
            let slope = antenna_stability_bound(&p) / p.m();
            let offset = lb * p.threshold * p.b0() / p.m();
            for k in 1..5000u64 {
                let linear = (slope - 1.0) * k as f64 + offset;
                let d = drift_diagnostic(k, &p) - linear;
                assert!((-1e-9..lb + 1e-9).contains(&d), "m={m} k={k} d={d}");
            }
        }
    }

    #[test]
    fn stationary_mean_rejects_unstable() {
        assert!(matches!(
            estimate_stationary_mean(&base(20.0).with_antennas(60), 1000, 10, 0),
            Err(Error::UnstableSystem { .. })
        ));
    }

    #[test]
    fn stationary_mean_light_load() {
        let p = base(0.5);
        let lb = effective_arrival_rate(0.5, 64);
        let e = estimate_stationary_mean(&p, 200_000, 1000, 4).unwrap();
        assert!(e.contains(lb, 1.5), "{e:?} vs {lb}");
    }

    #[test]
    fn stationary_mean_within_bounds_and_reproducible_across_seeds() {
        let p = base(20.0);
        let b = mean_pis_bounds(&p).unwrap();
        let a = estimate_stationary_mean(&p, 1_000_000, 10_000, 11).unwrap();
        let c = estimate_stationary_mean(&p, 1_000_000, 10_000, 12).unwrap();
        for e in [a, c] {
            assert!(e.mean >= b.lower && e.mean <= b.upper, "{e:?}");
            assert!(e.half_width < 0.02 * e.mean);
        }
        assert!((a.mean - c.mean).abs() <= a.half_width + c.half_width);
        // Same order as the ceiling-midpoint approximation, not equal to it.
        let tau = tau_pis(&p).unwrap();
        let ratio = (a.mean / b.lower) / tau.approx;
        assert!(ratio > 0.5 && ratio < 2.0, "{ratio}");
    }
}
