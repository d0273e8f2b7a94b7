//! Closed-form model of both access systems.
//!
//! Everything here works on the conditional mean SINR `M / (K b1 + b0)` and
//! on Poisson arrivals. The IRT results are the stability threshold on the
//! PiS chain, the maximum stable throughput and bounds on the
//! mean number of packets in service and on the mean number of transmissions.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Threshold quantities derived from a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedThresholds {
    /// Mean number of PC-free arrivals per slot.
    pub lambda_bar: f64,
    /// Largest concurrency decodable with a single transmission (real valued).
    pub k_gamma: f64,
    /// Maximum conventional throughput and the arrival rate achieving it.
    pub eta_con: f64,
    pub lambda_con: f64,
    /// Maximum stable IRT throughput and the arrival rate achieving it.
    pub eta_irt: f64,
    pub lambda_irt: f64,
    /// Whether the IRT system is stable at the configured arrival rate.
    pub stable: bool,
}

/// Lower bound, upper bound and approximation of a stationary quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    pub approx: f64,
}

/// Probability that a given device shares its preamble with at least one of
/// the other `k - 1` devices.
pub fn collision_probability(k: u64, l: u32) -> f64 {
    debug_assert!(k >= 1 && l >= 1);
    if k <= 1 {
        return 0.0;
    }
    1.0 - no_collision_factor(l).powf((k - 1) as f64)
}

fn no_collision_factor(l: u32) -> f64 {
    1.0 - 1.0 / f64::from(l)
}

/// Expected number of devices with a unique preamble among `k` devices.
pub fn expected_pc_free(k: u64, l: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    k as f64 * no_collision_factor(l).powf((k - 1) as f64)
}

/// Mean number of PC-free arrivals per slot for Poisson(`lambda`) arrivals.
pub fn effective_arrival_rate(lambda: f64, l: u32) -> f64 {
    lambda * (-lambda / f64::from(l)).exp()
}

/// Mean SINR after `q + 1` combined transmissions with `k` concurrent
/// transmitters: `(q + 1) M / (k b1 + b0)`.
pub fn mean_sinr_approx(k: u64, q: u64, params: &SystemParams) -> Result<f64> {
    let denom = k as f64 * params.b1() + params.b0();
    if !(denom > 0.0) {
        return Err(Error::InvalidParams(format!(
            "mean SINR denominator k*b1 + b0 = {denom} is not positive (k = {k})"
        )));
    }
    Ok((q + 1) as f64 * params.m() / denom)
}

/// Large-array limit of `E[SINR] / M` with `k` concurrent transmitters.
pub fn asymptotic_sinr_limit(k: u64, snr: f64) -> f64 {
    let k = k as f64;
    1.0 / ((k - 1.0) + (k + 1.0 / snr) / snr)
}

/// Concurrency threshold `(M / Gamma - b0) / b1`: a single transmission meets
/// the threshold on average iff `K <= k_gamma`.
pub fn k_gamma(params: &SystemParams) -> f64 {
    (params.m() / params.threshold - params.b0()) / params.b1()
}

fn k_gamma_floor(params: &SystemParams) -> i64 {
    k_gamma(params).floor() as i64
}

/// Poisson CDF `P(X <= n)` for `X ~ Poisson(mean)`.
///
/// Terms are accumulated by recursion in linear space; when `exp(-mean)`
/// would lose precision the sum is carried in log space instead.
pub fn poisson_cdf(mean: f64, n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    if mean <= 0.0 {
        return 1.0;
    }
    if mean < 600.0 {
        let mut term = (-mean).exp();
        let mut sum = term;
        for k in 1..=n {
            term *= mean / k as f64;
            sum += term;
            if k as f64 > mean && term < sum * 1e-18 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        poisson_cdf_log_space(mean, n)
    }
}

fn poisson_cdf_log_space(mean: f64, n: i64) -> f64 {
    let ln_mean = mean.ln();
    // log pmf peaks at min(n, floor(mean)); every term is scaled by that peak.
    let peak = (mean.floor() as i64).min(n);
    let mut ln_fact = 0.0;
    let mut ln_terms = Vec::new();
    for k in 0..=n {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let lt = -mean + k as f64 * ln_mean - ln_fact;
        ln_terms.push(lt);
        if k > peak && lt < ln_terms[peak as usize] - 45.0 {
            break;
        }
    }
    let max = ln_terms[peak as usize];
    let scaled: f64 = ln_terms.iter().map(|lt| (lt - max).exp()).sum();
    (max + scaled.ln()).exp().min(1.0)
}

/// Conventional-system throughput `lambda_bar * F(floor(K_Gamma) - 1)`.
pub fn conventional_throughput(lambda: f64, params: &SystemParams) -> f64 {
    let kg = k_gamma_floor(params);
    if kg <= 0 {
        return 0.0;
    }
    let lambda_bar = effective_arrival_rate(lambda, params.preambles);
    lambda_bar * poisson_cdf(lambda_bar, kg - 1)
}

/// Maximum of [`conventional_throughput`] over `lambda` in `(0, 10 L]`.
///
/// Returns `(eta_con, lambda_con)`. A grid at step `L / 1000` locates the
/// best bracket, which is then refined by golden-section search.
pub fn max_conventional_throughput(params: &SystemParams) -> (f64, f64) {
    let l = params.l();
    let step = l / 1000.0;
    let f = |lambda: f64| conventional_throughput(lambda, params);

    let mut best_i = 1usize;
    let mut best = f(step);
    for i in 2..=10_000usize {
        let v = f(i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }

    let mut lo = (best_i - 1) as f64 * step;
    let mut hi = (best_i + 1) as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let (arg, val) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if val > best {
        (val, arg)
    } else {
        (best, best_i as f64 * step)
    }
}

/// `lambda_bar * Gamma * b1`, the antenna count the IRT system must exceed.
pub fn antenna_stability_bound(params: &SystemParams) -> f64 {
    effective_arrival_rate(params.arrival_rate, params.preambles) * params.threshold * params.b1()
}

/// `M / (lambda_bar * b1)`, the threshold (linear) the IRT system must stay
/// below. Infinite at zero load.
pub fn threshold_stability_bound(params: &SystemParams) -> f64 {
    let lambda_bar = effective_arrival_rate(params.arrival_rate, params.preambles);
    params.m() / (lambda_bar * params.b1())
}

/// Positive recurrence of the PiS chain: `M > lambda_bar * Gamma * b1`.
pub fn irt_stable(params: &SystemParams) -> bool {
    params.m() > antenna_stability_bound(params)
}

/// Maximum stable IRT throughput `min(L/e, M / (Gamma b1))`.
pub fn max_irt_throughput(params: &SystemParams) -> f64 {
    (params.l() / E).min(params.m() / (params.threshold * params.b1()))
}

/// Arrival rate at which the IRT throughput reaches [`max_irt_throughput`].
///
/// This is the smaller root of `lambda e^{-lambda/L} = eta_irt`, or `L` when
/// the preamble limit binds.
pub fn max_irt_arrival_rate(params: &SystemParams) -> f64 {
    let l = params.l();
    let target = max_irt_throughput(params);
    if target >= l / E {
        return l;
    }
    let (mut lo, mut hi) = (0.0, l);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if effective_arrival_rate(mid, params.preambles) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The two load-free sufficient conditions for IRT stability:
/// `(M > (L/e) Gamma b1, M > lambda Gamma b1)`.
pub fn sufficient_conditions(params: &SystemParams) -> (bool, bool) {
    let gb1 = params.threshold * params.b1();
    let cond_l = params.m() > params.l() / E * gb1;
    let cond_lambda = params.m() > params.arrival_rate * gb1;
    (cond_l, cond_lambda)
}

fn stable_denominator(params: &SystemParams) -> Result<f64> {
    let bound = antenna_stability_bound(params);
    let denom = params.m() - bound;
    if denom > 0.0 {
        Ok(denom)
    } else {
        Err(Error::UnstableSystem {
            m: params.m(),
            bound,
        })
    }
}

/// Bounds and approximation of the stationary mean number of packets in
/// service. The upper bound and approximation are clamped below at the lower
/// bound.
pub fn mean_pis_bounds(params: &SystemParams) -> Result<Bounds> {
    let tau = tau_pis(params)?;
    let lambda_bar = effective_arrival_rate(params.arrival_rate, params.preambles);
    Ok(Bounds {
        lower: lambda_bar,
        upper: lambda_bar * tau.upper,
        approx: lambda_bar * tau.approx,
    })
}

/// Bounds and approximation of the mean number of transmissions per PC-free
/// packet, obtained from [`mean_pis_bounds`] through Little's law.
pub fn tau_pis(params: &SystemParams) -> Result<Bounds> {
    let denom = stable_denominator(params)?;
    let gb0 = params.threshold * params.b0();
    Ok(Bounds {
        lower: 1.0,
        upper: ((params.m() + gb0) / denom).max(1.0),
        approx: ((params.m() / 2.0 + gb0) / denom).max(1.0),
    })
}

pub fn derive_thresholds(params: &SystemParams) -> DerivedThresholds {
    let (eta_con, lambda_con) = max_conventional_throughput(params);
    DerivedThresholds {
        lambda_bar: effective_arrival_rate(params.arrival_rate, params.preambles),
        k_gamma: k_gamma(params),
        eta_con,
        lambda_con,
        eta_irt: max_irt_throughput(params),
        lambda_irt: max_irt_arrival_rate(params),
        stable: irt_stable(params),
    }
}
