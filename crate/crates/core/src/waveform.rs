//! Hybrid FH-CDMA transmit waveform.
//!
//! Each data bit is spread by the beacon's Walsh-Hadamard code row into
//! `order` BPSK chips; all chips of one symbol ride a single sinusoidal
//! carrier whose frequency is taken from the hop sequence, so the hop rate
//! equals the symbol rate.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lowest admissible carrier center (Hz).
pub const MIN_CENTER_HZ: f64 = 20_000.0;
/// Highest admissible carrier center (Hz).
pub const MAX_CENTER_HZ: f64 = 50_000.0;

/// Six 5 kHz channels between 20 and 50 kHz.
pub const DEFAULT_CENTERS_HZ: [f64; 6] = [22_500.0, 27_500.0, 32_500.0, 37_500.0, 42_500.0, 47_500.0];
pub const DEFAULT_CHANNEL_BANDWIDTH_HZ: f64 = 5_000.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 340_000.0;
pub const DEFAULT_SYMBOL_DURATION_S: f64 = 2e-3;
pub const DEFAULT_BURST_BITS: usize = 32;
pub const DEFAULT_WALSH_ORDER: usize = 4;

/// Sylvester-constructed Walsh-Hadamard matrix with ±1 entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalshMatrix {
    order: usize,
    rows: Vec<Vec<i8>>,
}

impl WalshMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<i8>] {
        &self.rows
    }
}

/// Builds the Walsh-Hadamard matrix of the given power-of-two order.
pub fn walsh_hadamard(order: usize) -> Result<WalshMatrix> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::invalid(format!("Walsh-Hadamard order must be a power of two, got {order}")));
    }
    let mut rows = vec![vec![1i8]];
    while rows.len() < order {
        let n = rows.len();
        let mut next = Vec::with_capacity(2 * n);
        for r in &rows {
            next.push(r.iter().chain(r.iter()).copied().collect());
        }
        for r in &rows {
            next.push(r.iter().copied().chain(r.iter().map(|&v| -v)).collect());
        }
        rows = next;
    }
    Ok(WalshMatrix { order, rows })
}

/// Spreads one ±1 data bit with a code row: `chip[k] = data_bit · code_row[k]`.
pub fn encode_symbol(data_bit: i8, code_row: &[i8]) -> Vec<i8> {
    debug_assert!(data_bit == 1 || data_bit == -1);
    code_row.iter().map(|&c| data_bit * c).collect()
}

/// Carrier channels and the per-symbol hop pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopPlan<F> {
    pub center_frequencies: Vec<F>,
    pub channel_bandwidth: F,
    pub hop_sequence: Vec<usize>,
    /// Carrier phase φ in radians.
    pub carrier_phase: F,
}

impl<F: Real> HopPlan<F> {
    pub fn new(center_frequencies: Vec<F>, channel_bandwidth: F, hop_sequence: Vec<usize>, carrier_phase: F) -> Result<Self> {
        let plan = Self { center_frequencies, channel_bandwidth, hop_sequence, carrier_phase };
        plan.validate()?;
        Ok(plan)
    }

    /// Pseudo-random hop sequence of `n_hops` entries. Consecutive symbols
    /// never share a channel when more than one channel exists.
    pub fn seeded(center_frequencies: Vec<F>, channel_bandwidth: F, n_hops: usize, seed: u64, carrier_phase: F) -> Result<Self> {
        let n_ch = center_frequencies.len();
        if n_ch == 0 {
            return Err(Error::invalid("hop plan needs at least one channel"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seq = Vec::with_capacity(n_hops);
        let mut prev: Option<usize> = None;
        for _ in 0..n_hops {
            let next = match prev {
                Some(p) if n_ch > 1 => {
                    let k = rng.random_range(0..n_ch - 1);
                    if k >= p {
                        k + 1
                    } else {
                        k
                    }
                }
                _ => rng.random_range(0..n_ch),
            };
            seq.push(next);
            prev = Some(next);
        }
        Self::new(center_frequencies, channel_bandwidth, seq, carrier_phase)
    }

    /// The six default channels with a seeded hop sequence.
    pub fn default_seeded(n_hops: usize, seed: u64) -> Self {
        Self::seeded(
            DEFAULT_CENTERS_HZ.iter().map(|&f| F::lit(f)).collect(),
            F::lit(DEFAULT_CHANNEL_BANDWIDTH_HZ),
            n_hops,
            seed,
            F::zero(),
        )
        .expect("default channels are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.center_frequencies.is_empty() {
            return Err(Error::invalid("hop plan needs at least one channel"));
        }
        if !(self.channel_bandwidth > F::zero()) {
            return Err(Error::invalid("channel bandwidth must be positive"));
        }
        for &f in &self.center_frequencies {
            let fv = f.to_f64_lossy();
            if !(MIN_CENTER_HZ..=MAX_CENTER_HZ).contains(&fv) {
                return Err(Error::invalid(format!("center frequency {fv} Hz outside [20 kHz, 50 kHz]")));
            }
        }
        let mut sorted: Vec<F> = self.center_frequencies.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in sorted.windows(2) {
            // Adjacent channels may touch but not overlap.
            if w[1] - w[0] < self.channel_bandwidth * F::lit(1.0 - 1e-9) {
                return Err(Error::invalid(format!(
                    "channels at {} Hz and {} Hz overlap for bandwidth {} Hz",
                    w[0], w[1], self.channel_bandwidth
                )));
            }
        }
        if let Some(&bad) = self.hop_sequence.iter().find(|&&i| i >= self.center_frequencies.len()) {
            return Err(Error::invalid(format!("hop index {bad} out of range")));
        }
        if !self.carrier_phase.is_finite() {
            return Err(Error::invalid("carrier phase must be finite"));
        }
        Ok(())
    }

    pub fn max_center(&self) -> F {
        self.center_frequencies.iter().copied().fold(F::neg_infinity(), F::max)
    }

    /// Carrier frequency of symbol `s`.
    pub fn frequency_of_symbol(&self, s: usize) -> F {
        self.center_frequencies[self.hop_sequence[s]]
    }
}

/// Per-beacon transmit parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig<F> {
    pub sample_rate: F,
    pub symbol_duration: F,
    pub data_bits: Vec<i8>,
    pub code_row_index: usize,
}

impl<F: Real> WaveformConfig<F> {
    pub fn new(sample_rate: F, symbol_duration: F, data_bits: Vec<i8>, code_row_index: usize) -> Self {
        Self { sample_rate, symbol_duration, data_bits, code_row_index }
    }

    /// Default rate and symbol length with the given bits.
    pub fn with_bits(data_bits: Vec<i8>, code_row_index: usize) -> Self {
        Self::new(F::lit(DEFAULT_SAMPLE_RATE_HZ), F::lit(DEFAULT_SYMBOL_DURATION_S), data_bits, code_row_index)
    }

    /// Whole samples per symbol; errors if `T_B · fₛ` is not an integer.
    pub fn samples_per_symbol(&self) -> Result<usize> {
        if !(self.sample_rate > F::zero()) || !(self.symbol_duration > F::zero()) {
            return Err(Error::invalid("sample rate and symbol duration must be positive"));
        }
        let exact = (self.symbol_duration * self.sample_rate).to_f64_lossy();
        let n = exact.round();
        if n < 1.0 || (exact - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::invalid(format!("symbol duration spans {exact} samples, not a whole number")));
        }
        Ok(n as usize)
    }

    /// Samples per chip for a code of length `code_len`.
    pub fn samples_per_chip(&self, code_len: usize) -> Result<usize> {
        let sps = self.samples_per_symbol()?;
        if code_len == 0 || sps % code_len != 0 {
            return Err(Error::invalid(format!(
                "{sps} samples per symbol cannot be split into {code_len} whole-sample chips"
            )));
        }
        Ok(sps / code_len)
    }

    pub fn validate(&self, plan: &HopPlan<F>, code_len: usize) -> Result<()> {
        plan.validate()?;
        if self.sample_rate < F::lit(2.0) * plan.max_center() {
            return Err(Error::invalid(format!(
                "sample rate {} Hz is below Nyquist for {} Hz carriers",
                self.sample_rate,
                plan.max_center()
            )));
        }
        self.samples_per_chip(code_len)?;
        if let Some(b) = self.data_bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::invalid(format!("data bits must be ±1, got {b}")));
        }
        if plan.hop_sequence.len() < self.data_bits.len() {
            return Err(Error::invalid(format!(
                "hop sequence has {} entries for {} data bits",
                plan.hop_sequence.len(),
                self.data_bits.len()
            )));
        }
        Ok(())
    }
}

/// Uniformly sampled real waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal<F> {
    pub samples: Vec<F>,
    pub sample_rate: F,
}

impl<F: Real> SampledSignal<F> {
    pub fn new(samples: Vec<F>, sample_rate: F) -> Result<Self> {
        if !(sample_rate > F::zero()) || !sample_rate.is_finite() {
            return Err(Error::invalid("sample rate must be positive and finite"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal contains non-finite samples"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: F) -> Self {
        Self { samples: vec![F::zero(); len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> F {
        self.samples.iter().fold(F::zero(), |acc, &v| acc + v * v)
    }

    /// Mean power over the whole record.
    pub fn power(&self) -> F {
        if self.samples.is_empty() {
            F::zero()
        } else {
            self.energy() / F::lit(self.samples.len() as f64)
        }
    }

    pub fn duration(&self) -> F {
        F::lit(self.samples.len() as f64) / self.sample_rate
    }
}

/// Seeded ±1 data bits.
pub fn random_bits(n: usize, seed: u64) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

/// Synthesizes `d · c · p_TB(t) · sin(2π f_m t + φ)` for every symbol of `config`.
///
/// Time `t` runs continuously from the first sample of the burst; the chip
/// boundaries fall on whole samples.
pub fn generate_tx_signal<F: Real>(config: &WaveformConfig<F>, plan: &HopPlan<F>, code: &[i8]) -> Result<SampledSignal<F>> {
    config.validate(plan, code.len())?;
    let sps = config.samples_per_symbol()?;
    let spc = sps / code.len();
    let fs = config.sample_rate.to_f64_lossy();
    let phase = plan.carrier_phase.to_f64_lossy();

    let mut samples = Vec::with_capacity(config.data_bits.len() * sps);
    for (s, &bit) in config.data_bits.iter().enumerate() {
        let f = plan.frequency_of_symbol(s).to_f64_lossy();
        let chips = encode_symbol(bit, code);
        for k in 0..sps {
            let n = s * sps + k;
            let t = n as f64 / fs;
            let chip = f64::from(chips[k / spc]);
            samples.push(F::lit(chip * (2.0 * PI * f * t + phase).sin()));
        }
    }
    SampledSignal::new(samples, config.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walsh_small_orders() {
        assert_eq!(walsh_hadamard(1).unwrap().rows(), &[vec![1]]);
        assert_eq!(walsh_hadamard(2).unwrap().rows(), &[vec![1, 1], vec![1, -1]]);
        let w4 = walsh_hadamard(4).unwrap();
        assert_eq!(
            w4.rows(),
            &[vec![1, 1, 1, 1], vec![1, -1, 1, -1], vec![1, 1, -1, -1], vec![1, -1, -1, 1]]
        );
    }

    #[test]
    fn walsh_rejects_non_power_of_two() {
        for bad in [0, 3, 6, 12] {
            assert!(matches!(walsh_hadamard(bad), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn walsh_invariants_up_to_64() {
        for order in [1, 2, 4, 8, 16, 32, 64] {
            let w = walsh_hadamard(order).unwrap();
            assert!(w.row(0).iter().all(|&v| v == 1));
            for i in 0..order {
                for j in 0..order {
                    let dot: i32 = w.row(i).iter().zip(w.row(j)).map(|(&a, &b)| i32::from(a * b)).sum();
                    assert_eq!(dot, if i == j { order as i32 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn encode_symbol_examples() {
        assert_eq!(encode_symbol(1, &[1, -1, 1, -1]), vec![1, -1, 1, -1]);
        assert_eq!(encode_symbol(-1, &[1, -1, 1, -1]), vec![-1, 1, -1, 1]);
        assert_eq!(encode_symbol(-1, &[1, 1, 1, 1]), vec![-1, -1, -1, -1]);
    }

    #[test]
    fn hop_plan_validation() {
        let centers: Vec<f64> = DEFAULT_CENTERS_HZ.to_vec();
        assert!(HopPlan::new(centers.clone(), 5_000.0, vec![0, 5], 0.0).is_ok());
        assert!(HopPlan::new(centers.clone(), 5_000.0, vec![6], 0.0).is_err());
        assert!(HopPlan::new(centers.clone(), 6_000.0, vec![0], 0.0).is_err());
        assert!(HopPlan::new(vec![19_000.0], 5_000.0, vec![0], 0.0).is_err());
        assert!(HopPlan::new(vec![51_000.0], 5_000.0, vec![0], 0.0).is_err());
    }

    #[test]
    fn seeded_hops_never_repeat_back_to_back() {
        let plan = HopPlan::<f64>::default_seeded(500, 11);
        assert!(plan.hop_sequence.windows(2).all(|w| w[0] != w[1]));
        let counts = (0..6).map(|c| plan.hop_sequence.iter().filter(|&&h| h == c).count());
        assert!(counts.into_iter().all(|n| n > 50));
        assert_eq!(plan, HopPlan::default_seeded(500, 11));
    }

    #[test]
    fn config_rejects_misaligned_chips_and_nyquist() {
        let plan = HopPlan::<f64>::default_seeded(4, 1);
        let cfg = WaveformConfig::new(340_000.0, 2.001e-3, vec![1], 0);
        assert!(cfg.samples_per_symbol().is_err());
        // 678 samples per symbol: not divisible by 4 chips.
        let cfg = WaveformConfig::new(339_000.0, 2e-3, vec![1], 0);
        assert!(generate_tx_signal(&cfg, &plan, &[1, 1, 1, 1]).is_err());
        let cfg = WaveformConfig::new(80_000.0, 2e-3, vec![1], 0);
        assert!(generate_tx_signal(&cfg, &plan, &[1, 1, 1, 1]).is_err());
    }

    #[test]
    fn tx_length_and_antipodality() {
        let plan = HopPlan::<f64>::default_seeded(32, 3);
        let bits = random_bits(32, 9);
        let w = walsh_hadamard(4).unwrap();
        let cfg = WaveformConfig::with_bits(bits.clone(), 2);
        let s = generate_tx_signal(&cfg, &plan, w.row(2)).unwrap();
        assert_eq!(s.len(), 32 * 680);
        let neg = WaveformConfig::with_bits(bits.iter().map(|&b| -b).collect(), 2);
        let sn = generate_tx_signal(&neg, &plan, w.row(2)).unwrap();
        assert!(s.samples.iter().zip(&sn.samples).all(|(a, b)| *a == -*b));
        assert!(s.samples.iter().all(|v| v.abs() <= 1.0));
    }

    /// Fraction of one symbol's energy within ±bandwidth/2 of its carrier,
    /// from a 16× zero-padded DFT evaluated only on in-band bins (Parseval).
    fn in_band_fraction(x: &[f64], f: f64, bandwidth: f64, fs: f64) -> f64 {
        let n_fft = x.len() * 16;
        let df = fs / n_fft as f64;
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let half = (bandwidth / 2.0 / df).floor() as i64;
        let centre = (f / df).round() as i64;
        let mut in_band = 0.0;
        for k in (centre - half)..=(centre + half) {
            let w = 2.0 * PI * k as f64 / n_fft as f64;
            let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, v)| (re + v * (w * n as f64).cos(), im - v * (w * n as f64).sin()));
            // Negative-frequency mirror carries the same energy for real input.
            in_band += 2.0 * (re * re + im * im);
        }
        in_band / (n_fft as f64 * energy)
    }

    #[test]
    fn symbol_energy_stays_in_its_channel() {
        let w = walsh_hadamard(4).unwrap();
        let plan = HopPlan::<f64>::new(DEFAULT_CENTERS_HZ.to_vec(), 5_000.0, vec![0, 5], 0.0).unwrap();
        for row in 0..4 {
            let s = generate_tx_signal(&WaveformConfig::with_bits(vec![1, -1], row), &plan, w.row(row)).unwrap();
            for (sym, f) in [(0, 22_500.0), (1, 47_500.0)] {
                let frac = in_band_fraction(&s.samples[sym * 680..(sym + 1) * 680], f, 5_000.0, 340_000.0);
                // Rows 1 and 3 alternate every one or two chips; their ±3 kHz
                // harmonics fall outside the channel.
                if row % 2 == 0 {
                    assert!(frac >= 0.9, "row {row} at {f} Hz: {frac}");
                } else {
                    assert!((0.8..0.9).contains(&frac), "row {row} at {f} Hz: {frac}");
                }
            }
        }
    }
}
