//! Slot-level simulation of the conventional and IRT access systems.
//!
//! Each slot: Poisson arrivals pick preambles, collided devices are told to
//! stay silent (Type-I feedback) and drop their packets, and every PC-free
//! transmitter's realized SINR is added to its combined SINR. A packet whose
//! combined SINR reaches the threshold is decoded. Otherwise the conventional
//! system drops it, while the IRT system keeps it in service and the device
//! re-transmits in the next slot without a preamble.

use rand_distr::{Distribution, Poisson};

use crate::analytic::effective_arrival_rate;
use crate::chanmodel::{assign_preambles, draw_channel, ChannelHandle, ConcurrentSet};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::rng::{stream, SimRng};
use crate::stats::{batch_mean, batch_ratio, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Low-SINR PC-free packets are dropped.
    Conventional,
    /// Low-SINR PC-free packets are re-transmitted immediately.
    Irt,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Conventional => "conventional",
            Mode::Irt => "irt",
        }
    }
}

/// Protocol switches and divergence watchdog limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Collided devices withhold data. When off they transmit undecodable
    /// data and only add interference.
    pub type1_feedback: bool,
    /// Ceiling on concurrent PC-free transmitters; `None` means
    /// `100 * max(lambda_bar, 1)`.
    pub max_in_service: Option<usize>,
    /// Cap on the re-transmission count of any packet.
    pub max_retx: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            type1_feedback: true,
            max_in_service: None,
            max_retx: 10_000,
        }
    }
}

impl ProtocolConfig {
    pub fn in_service_ceiling(&self, params: &SystemParams) -> usize {
        self.max_in_service.unwrap_or_else(|| {
            let lambda_bar = effective_arrival_rate(params.arrival_rate, params.preambles);
            (100.0 * lambda_bar.max(1.0)).ceil() as usize
        })
    }
}

/// A PC-free device whose packet is in service.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub id: u64,
    pub channel: ChannelHandle,
    /// Re-transmissions so far; 0 during the first transmission.
    pub q: u64,
    pub accumulated_sinr: f64,
    pub birth_slot: u64,
}

/// Per-slot census.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotLedger {
    pub t: u64,
    /// New PC-free devices.
    pub arrivals: u64,
    /// New active devices before preamble collisions.
    pub raw_arrivals: u64,
    pub pc_drops: u64,
    pub decoded: u64,
    /// Transmissions (`q + 1`) summed over this slot's decoded packets.
    pub decoded_transmissions: u64,
    pub sinr_drops: u64,
    /// PC-free data transmitters in this slot, new and re-transmitting.
    pub in_service: u64,
}

/// Whole-run counters used for conservation checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunTotals {
    pub slots: u64,
    pub raw_arrivals: u64,
    pub pc_drops: u64,
    pub sinr_drops: u64,
    pub decoded: u64,
    pub in_service_at_end: u64,
}

impl RunTotals {
    fn record(&mut self, ledger: &SlotLedger) {
        self.slots += 1;
        self.raw_arrivals += ledger.raw_arrivals;
        self.pc_drops += ledger.pc_drops;
        self.sinr_drops += ledger.sinr_drops;
        self.decoded += ledger.decoded;
    }

    /// Every arrival is accounted for as dropped, decoded or still in service.
    pub fn is_conserved(&self) -> bool {
        self.raw_arrivals == self.pc_drops + self.sinr_drops + self.decoded + self.in_service_at_end
    }
}

/// Slot-by-slot simulator for one trial.
#[derive(Debug)]
pub struct Simulator {
    mode: Mode,
    params: SystemParams,
    config: ProtocolConfig,
    ceiling: usize,
    arrivals: Option<Poisson<f64>>,
    rng: SimRng,
    set: ConcurrentSet,
    in_service: Vec<DeviceState>,
    t: u64,
    next_id: u64,
    totals: RunTotals,
    unstable: bool,
}

impl Simulator {
    pub fn new(
        mode: Mode,
        params: SystemParams,
        config: ProtocolConfig,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let arrivals = if params.arrival_rate > 0.0 {
            Some(Poisson::new(params.arrival_rate).map_err(|e| {
                Error::InvalidParams(format!("arrival rate {}: {e}", params.arrival_rate))
            })?)
        } else {
            None
        };
        Ok(Self {
            mode,
            ceiling: config.in_service_ceiling(&params),
            params,
            config,
            arrivals,
            rng: stream(seed),
            set: ConcurrentSet::new(params.antennas as usize),
            in_service: Vec::new(),
            t: 0,
            next_id: 0,
            totals: RunTotals::default(),
            unstable: false,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Packets carried into the next slot (always empty in conventional mode).
    pub fn state(&self) -> &[DeviceState] {
        &self.in_service
    }

    pub fn totals(&self) -> RunTotals {
        RunTotals {
            in_service_at_end: self.in_service.len() as u64,
            ..self.totals
        }
    }

    /// Whether the watchdog has tripped.
    pub fn is_unstable(&self) -> bool {
        self.unstable
    }

    /// Runs one slot with Poisson arrivals.
    pub fn run_slot(&mut self) -> Result<SlotLedger> {
        let k = match &self.arrivals {
            Some(d) => d.sample(&mut self.rng) as usize,
            None => 0,
        };
        self.run_slot_with_arrivals(k)
    }

    /// Runs one slot with exactly `k` new active devices.
    pub fn run_slot_with_arrivals(&mut self, k: usize) -> Result<SlotLedger> {
        let m = self.params.antennas as usize;
        let snr = self.params.snr;
        let assignment = assign_preambles(k, self.params.preambles, &mut self.rng);
        let new_pc_free = assignment.pc_free.len();

        for _ in 0..new_pc_free {
            let channel = self.set.insert(draw_channel(m, &mut self.rng))?;
            self.in_service.push(DeviceState {
                id: self.next_id,
                channel,
                q: 0,
                accumulated_sinr: 0.0,
                birth_slot: self.t,
            });
            self.next_id += 1;
        }
        let mut silent_interferers = Vec::new();
        if !self.config.type1_feedback {
            for _ in 0..assignment.collided_count() {
                silent_interferers.push(self.set.insert(draw_channel(m, &mut self.rng))?);
            }
        }

        let mut ledger = SlotLedger {
            t: self.t,
            arrivals: new_pc_free as u64,
            raw_arrivals: k as u64,
            pc_drops: assignment.collided_count() as u64,
            in_service: self.in_service.len() as u64,
            ..SlotLedger::default()
        };

        // SINRs are evaluated against the full slot population before anyone leaves.
        for dev in &mut self.in_service {
            dev.accumulated_sinr += self.set.sinr(dev.channel, snr)?.value;
        }

        let threshold = self.params.threshold;
        let mode = self.mode;
        let mut kept = Vec::with_capacity(self.in_service.len());
        for mut dev in self.in_service.drain(..) {
            if dev.accumulated_sinr >= threshold {
                ledger.decoded += 1;
                ledger.decoded_transmissions += dev.q + 1;
                self.set.remove(dev.channel);
            } else if mode == Mode::Conventional {
                ledger.sinr_drops += 1;
                self.set.remove(dev.channel);
            } else {
                dev.q += 1;
                kept.push(dev);
            }
        }
        self.in_service = kept;
        for h in silent_interferers {
            self.set.remove(h);
        }

        if ledger.in_service as usize > self.ceiling
            || self.in_service.iter().any(|d| d.q > self.config.max_retx)
        {
            self.unstable = true;
        }

        self.totals.record(&ledger);
        self.t += 1;
        Ok(ledger)
    }
}

/// Post-warm-up statistics of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    /// Decoded packets per slot.
    pub throughput: Estimate,
    /// PC drops plus SINR drops per slot.
    pub drop_rate: Estimate,
    /// SINR drops per slot (zero for IRT).
    pub sinr_drop_rate: Estimate,
    /// Time average of the number of PC-free transmitters.
    pub mean_in_service: Estimate,
    /// Mean transmissions (`q + 1`) per decoded packet.
    pub mean_retx: Estimate,
    /// New active devices per slot.
    pub offered_load: Estimate,
    pub unstable_flag: bool,
    pub measured_slots: u64,
    pub totals: RunTotals,
}

impl MetricsAccumulator {
    /// Little's law residual `|L - W * departures| / L`, where departures are
    /// decoded plus SINR-dropped packets per slot. SINR-dropped packets made a
    /// single transmission, as did every decoded conventional packet.
    pub fn littles_law_gap(&self) -> f64 {
        let l = self.mean_in_service.mean;
        let departures_weighted =
            self.mean_retx.mean * self.throughput.mean + self.sinr_drop_rate.mean;
        (l - departures_weighted).abs() / l
    }

    /// Whether `throughput + drop_rate` matches the arrival rate `lambda`
    /// within Monte Carlo error: three half-widths of the offered load plus
    /// the in-service population left over at the run boundaries.
    pub fn flow_conserved(&self, lambda: f64) -> bool {
        let gap = (self.throughput.mean + self.drop_rate.mean - lambda).abs();
        let boundary = 2.0 * self.mean_in_service.mean / self.measured_slots.max(1) as f64;
        gap <= 3.0 * self.offered_load.half_width + boundary
    }
}

/// Default warm-up: 10% of the run, at least 1000 slots, never more than half.
pub fn default_warmup(slots: u64) -> u64 {
    (slots / 10).max(1000).min(slots / 2)
}

/// Runs `slots` slots and measures everything after the first `warmup`.
/// A watchdog trip ends the trial early; metrics cover the slots run so far.
pub fn run_trial(
    mode: Mode,
    params: &SystemParams,
    config: &ProtocolConfig,
    slots: u64,
    warmup: u64,
    seed: u64,
) -> Result<MetricsAccumulator> {
    if slots <= warmup {
        return Err(Error::InvalidInput(format!(
            "slots ({slots}) must exceed warm-up ({warmup})"
        )));
    }
    let mut sim = Simulator::new(mode, *params, *config, seed)?;
    let n = (slots - warmup) as usize;
    let mut decoded = Vec::with_capacity(n);
    let mut dropped = Vec::with_capacity(n);
    let mut sinr_dropped = Vec::with_capacity(n);
    let mut offered = Vec::with_capacity(n);
    let mut in_service = Vec::with_capacity(n);
    let mut transmissions = Vec::with_capacity(n);

    for t in 0..slots {
        let ledger = sim.run_slot()?;
        if t >= warmup {
            decoded.push(ledger.decoded as f64);
            dropped.push((ledger.pc_drops + ledger.sinr_drops) as f64);
            in_service.push(ledger.in_service as f64);
            transmissions.push(ledger.decoded_transmissions as f64);
            sinr_dropped.push(ledger.sinr_drops as f64);
            offered.push(ledger.raw_arrivals as f64);
        }
        if sim.is_unstable() {
            break;
        }
    }

    let measured = decoded.len() as u64;
    Ok(MetricsAccumulator {
        throughput: batch_mean(&decoded),
        drop_rate: batch_mean(&dropped),
        sinr_drop_rate: batch_mean(&sinr_dropped),
        mean_in_service: batch_mean(&in_service),
        mean_retx: batch_ratio(&transmissions, &decoded),
        offered_load: batch_mean(&offered),
        unstable_flag: sim.is_unstable(),
        measured_slots: measured,
        totals: sim.totals(),
    })
}

/// Mean transmissions per decoded packet in the IRT system.
///
/// Fails with [`Error::UnstableSystem`] if the watchdog trips.
pub fn measure_tau(
    params: &SystemParams,
    config: &ProtocolConfig,
    slots: u64,
    warmup: u64,
    seed: u64,
) -> Result<Estimate> {
    let metrics = run_trial(Mode::Irt, params, config, slots, warmup, seed)?;
    if metrics.unstable_flag {
        return Err(Error::UnstableSystem {
            m: params.m(),
            bound: crate::analytic::antenna_stability_bound(params),
        });
    }
    Ok(metrics.mean_retx)
}
