//! Channel-level physical layer.
//!
//! Devices are power controlled so that every receive vector is
//! `v_k * sqrt(P_rx)` with `v_k ~ CN(0, I_M)`. All quantities below are in
//! these normalized units: a correlator estimate is `sum v_k + n / sqrt(P_rx)`
//! and the conditional SINR of a PC-free device is the noise-averaged ratio
//!
//! ```text
//! SINR_k = (snr^2 |v_k|^2 + snr) / I_k
//! I_k    = sum_{j != k} (snr^2 |v_k^H v_j|^2 + snr |v_j|^2) / |v_k|^2 + snr + M / |v_k|^2
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A normalized channel vector `v_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(Vec<Complex64>);

impl ChannelVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `self^H other`.
    pub fn inner(&self, other: &ChannelVector) -> Complex64 {
        inner_product(&self.0, &other.0)
    }
}

/// `a^H b`, accumulated in four lanes.
pub(crate) fn inner_product(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (tail_a, tail_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..4 {
            re[i] += ca[i].re * cb[i].re + ca[i].im * cb[i].im;
            im[i] += ca[i].re * cb[i].im - ca[i].im * cb[i].re;
        }
    }
    let mut acc = Complex64::new(re.iter().sum(), im.iter().sum());
    for (x, y) in tail_a.iter().zip(tail_b) {
        acc += x.conj() * y;
    }
    acc
}

fn standard_complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One `CN(0, I_M)` draw.
pub fn draw_channel<R: Rng + ?Sized>(m: usize, rng: &mut R) -> ChannelVector {
    ChannelVector((0..m).map(|_| standard_complex_gaussian(rng)).collect())
}

pub fn draw_channels<R: Rng + ?Sized>(count: usize, m: usize, rng: &mut R) -> Vec<ChannelVector> {
    (0..count).map(|_| draw_channel(m, rng)).collect()
}

/// Correlator output for one preamble.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub entries: Vec<Complex64>,
    /// Two or more devices chose this preamble.
    pub collided: bool,
}

/// Correlator estimate `g_l = sum_{k in K_l} v_k + n_l / sqrt(P_rx)`, where the
/// normalized noise has per-entry variance `1 / snr`.
pub fn estimate_channel<R: Rng + ?Sized>(
    members: &[&ChannelVector],
    m: usize,
    snr: f64,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    if let Some(bad) = members.iter().find(|v| v.len() != m) {
        return Err(Error::InvalidInput(format!(
            "channel length {} does not match M = {m}",
            bad.len()
        )));
    }
    let noise_scale = (1.0 / snr).sqrt();
    let entries = (0..m)
        .map(|i| {
            let signal: Complex64 = members.iter().map(|v| v.0[i]).sum();
            signal + standard_complex_gaussian(rng) * noise_scale
        })
        .collect();
    Ok(ChannelEstimate {
        entries,
        collided: members.len() >= 2,
    })
}

/// Preamble choices of one slot's new active devices.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleAssignment {
    /// Zero-based preamble index per device.
    pub choices: Vec<u32>,
    /// Devices (indices into `choices`) whose preamble nobody else chose.
    pub pc_free: Vec<usize>,
}

impl PreambleAssignment {
    pub fn collided_count(&self) -> usize {
        self.choices.len() - self.pc_free.len()
    }
}

pub fn assign_preambles<R: Rng + ?Sized>(k: usize, l: u32, rng: &mut R) -> PreambleAssignment {
    let choices: Vec<u32> = (0..k).map(|_| rng.random_range(0..l)).collect();
    let mut counts = vec![0u32; l as usize];
    for &c in &choices {
        counts[c as usize] += 1;
    }
    let pc_free = choices
        .iter()
        .enumerate()
        .filter(|&(_, &c)| counts[c as usize] == 1)
        .map(|(i, _)| i)
        .collect();
    PreambleAssignment { choices, pc_free }
}

/// Realized conditional SINR of one PC-free device in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub value: f64,
    /// Number of simultaneous data transmitters, target included.
    pub concurrent: usize,
}

/// Signal power and interference-plus-noise power `(snr^2 |v|^2 + snr, I_k)`
/// for `channels[target]`.
pub fn sinr_terms(target: usize, channels: &[ChannelVector], snr: f64) -> Result<(f64, f64)> {
    let v = channels.get(target).ok_or_else(|| {
        Error::InvalidInput(format!(
            "target {target} out of range for {} channels",
            channels.len()
        ))
    })?;
    let m = v.len();
    let norm = v.norm_sqr();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("target channel has zero norm".into()));
    }
    let mut cross = 0.0;
    let mut others = 0.0;
    for (j, w) in channels.iter().enumerate() {
        if j == target {
            continue;
        }
        if w.len() != m {
            return Err(Error::InvalidInput(format!(
                "channel {j} has length {}, expected {m}",
                w.len()
            )));
        }
        cross += v.inner(w).norm_sqr();
        others += w.norm_sqr();
    }
    Ok(sinr_from_sums(norm, cross, others, snr, m as f64))
}

pub(crate) fn sinr_from_sums(norm: f64, cross: f64, others: f64, snr: f64, m: f64) -> (f64, f64) {
    let signal = snr * snr * norm + snr;
    let interference = (snr * snr * cross + snr * others) / norm + snr + m / norm;
    (signal, interference)
}

/// Conditional SINR of `channels[target]` against every other entry of
/// `channels`, which must all be transmitting in the same slot.
pub fn realized_sinr(target: usize, channels: &[ChannelVector], snr: f64) -> Result<SinrSample> {
    let (signal, interference) = sinr_terms(target, channels, snr)?;
    Ok(SinrSample {
        value: signal / interference,
        concurrent: channels.len(),
    })
}

/// Chase-combined SINR: the plain sum of the per-slot SINRs.
pub fn rtd_accumulate(history: &[SinrSample]) -> f64 {
    history.iter().map(|s| s.value).sum()
}

/// Handle into a [`ConcurrentSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelHandle(usize);

/// The set of channel vectors transmitting in the current slot, with cached
/// pairwise cross powers `|v_i^H v_j|^2`.
///
/// Channels are fixed for a device's lifetime, so a new member costs one
/// inner product per existing member and departures cost nothing beyond
/// bookkeeping. SINRs agree with [`realized_sinr`] up to summation order.
#[derive(Debug, Clone)]
pub struct ConcurrentSet {
    m: usize,
    capacity: usize,
    cross: Vec<f64>,
    norms: Vec<f64>,
    channels: Vec<Option<ChannelVector>>,
    free: Vec<usize>,
    members: Vec<usize>,
    position: Vec<usize>,
}

impl ConcurrentSet {
    pub fn new(m: usize) -> Self {
        Self::with_capacity(m, 64)
    }

    pub fn with_capacity(m: usize, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            m,
            capacity,
            cross: vec![0.0; capacity * capacity],
            norms: vec![0.0; capacity],
            channels: vec![None; capacity],
            free: (0..capacity).rev().collect(),
            members: Vec::new(),
            position: vec![usize::MAX; capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn antennas(&self) -> usize {
        self.m
    }

    pub fn channel(&self, h: ChannelHandle) -> Option<&ChannelVector> {
        self.channels.get(h.0).and_then(Option::as_ref)
    }

    fn grow(&mut self) {
        let old = self.capacity;
        let new = old * 2;
        let mut cross = vec![0.0; new * new];
        for i in 0..old {
            cross[i * new..i * new + old].copy_from_slice(&self.cross[i * old..(i + 1) * old]);
        }
        self.cross = cross;
        self.norms.resize(new, 0.0);
        self.channels.resize(new, None);
        self.position.resize(new, usize::MAX);
        self.free.extend((old..new).rev());
        self.capacity = new;
    }

    pub fn insert(&mut self, channel: ChannelVector) -> Result<ChannelHandle> {
        if channel.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "channel length {} does not match M = {}",
                channel.len(),
                self.m
            )));
        }
        if self.free.is_empty() {
            self.grow();
        }
        let slot = self.free.pop().expect("free slot after growth");
        let cap = self.capacity;
        for &j in &self.members {
            let other = self.channels[j].as_ref().expect("live member");
            let p = channel.inner(other).norm_sqr();
            self.cross[slot * cap + j] = p;
            self.cross[j * cap + slot] = p;
        }
        self.cross[slot * cap + slot] = 0.0;
        self.norms[slot] = channel.norm_sqr();
        self.channels[slot] = Some(channel);
        self.position[slot] = self.members.len();
        self.members.push(slot);
        Ok(ChannelHandle(slot))
    }

    pub fn remove(&mut self, h: ChannelHandle) -> Option<ChannelVector> {
        let slot = h.0;
        let channel = self.channels.get_mut(slot)?.take()?;
        let pos = self.position[slot];
        self.members.swap_remove(pos);
        if let Some(&moved) = self.members.get(pos) {
            self.position[moved] = pos;
        }
        self.position[slot] = usize::MAX;
        self.free.push(slot);
        Some(channel)
    }

    /// SINR of member `h` against all other current members.
    pub fn sinr(&self, h: ChannelHandle, snr: f64) -> Result<SinrSample> {
        let slot = h.0;
        if self.channels.get(slot).is_none_or(Option::is_none) {
            return Err(Error::InvalidInput(format!(
                "unknown channel handle {slot}"
            )));
        }
        let norm = self.norms[slot];
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("target channel has zero norm".into()));
        }
        let row = &self.cross[slot * self.capacity..(slot + 1) * self.capacity];
        let mut cross = 0.0;
        let mut others = 0.0;
        for &j in &self.members {
            if j != slot {
                cross += row[j];
                others += self.norms[j];
            }
        }
        let (signal, interference) = sinr_from_sums(norm, cross, others, snr, self.m as f64);
        Ok(SinrSample {
            value: signal / interference,
            concurrent: self.members.len(),
        })
    }
}
