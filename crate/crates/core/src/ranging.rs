//! Receiver chain: despreading, matched filtering and time-of-arrival ranging.

use std::sync::Arc;

use num_traits::Float;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::waveform::{generate_tx_signal, HopPlan, SampledSignal, WaveformConfig};

/// Below this many multiply-adds the direct sum is used instead of an FFT.
const DIRECT_CORRELATION_LIMIT: usize = 1 << 18;

/// Time-of-arrival estimate for one beacon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate<F> {
    pub beacon_index: usize,
    /// `peak_sample / fₛ · c`.
    pub distance: F,
    pub peak_sample: usize,
    pub peak_value: F,
}

/// Result of chip-wise despreading.
#[derive(Clone, Debug, PartialEq)]
pub struct Despread<F> {
    pub signal: SampledSignal<F>,
    /// A trailing partial symbol was discarded.
    pub truncated: bool,
}

/// Multiplies every chip interval of `received` by the matching code chip.
///
/// Chip intervals are aligned to the start of the record.
pub fn despread<F: Real>(received: &SampledSignal<F>, code_row: &[i8], config: &WaveformConfig<F>) -> Result<Despread<F>> {
    let sps = config.samples_per_symbol()?;
    let spc = config.samples_per_chip(code_row.len())?;
    let whole = received.len() / sps * sps;
    let samples = received.samples[..whole]
        .iter()
        .enumerate()
        .map(|(n, &v)| if code_row[(n % sps) / spc] > 0 { v } else { -v })
        .collect();
    Ok(Despread {
        signal: SampledSignal { samples, sample_rate: received.sample_rate },
        truncated: whole != received.len(),
    })
}

/// Coherent BPSK statistics for a symbol-aligned record.
///
/// Each chip is projected onto its hop carrier and normalized by the carrier
/// energy inside that chip, then the chips are combined with `code_row`. For
/// a noiseless synchronous composite the statistic of symbol `s` equals the
/// data bit `d[s]` of the beacon using `code_row`: the other codes cancel
/// exactly.
pub fn symbol_statistics<F: Real>(
    received: &SampledSignal<F>,
    code_row: &[i8],
    config: &WaveformConfig<F>,
    plan: &HopPlan<F>,
) -> Result<Vec<F>> {
    let sps = config.samples_per_symbol()?;
    let spc = config.samples_per_chip(code_row.len())?;
    let n_symbols = (received.len() / sps).min(plan.hop_sequence.len());
    let fs = config.sample_rate.to_f64_lossy();
    let phase = plan.carrier_phase.to_f64_lossy();
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut out = Vec::with_capacity(n_symbols);
    for s in 0..n_symbols {
        let f = plan.frequency_of_symbol(s).to_f64_lossy();
        let mut stat = 0.0;
        for (m, &c) in code_row.iter().enumerate() {
            let (mut proj, mut norm) = (0.0, 0.0);
            for k in 0..spc {
                let n = s * sps + m * spc + k;
                let carrier = (two_pi * f * n as f64 / fs + phase).sin();
                proj += received.samples[n].to_f64_lossy() * carrier;
                norm += carrier * carrier;
            }
            stat += f64::from(c) * proj / norm;
        }
        out.push(F::lit(stat / code_row.len() as f64));
    }
    Ok(out)
}

/// Hard BPSK decisions from [`symbol_statistics`].
pub fn demodulate_bits<F: Real>(
    received: &SampledSignal<F>,
    code_row: &[i8],
    config: &WaveformConfig<F>,
    plan: &HopPlan<F>,
) -> Result<Vec<i8>> {
    Ok(symbol_statistics(received, code_row, config, plan)?
        .into_iter()
        .map(|v| if v >= F::zero() { 1 } else { -1 })
        .collect())
}

/// `out[L] = Σ_k received[k + L] · reference[k]` for `L ∈ [0, len(received) − len(reference)]`.
pub fn cross_correlate<F: Real>(received: &SampledSignal<F>, reference: &SampledSignal<F>) -> Result<Vec<F>> {
    correlate_slices(&received.samples, &reference.samples)
}

pub fn correlate_slices<F: Real>(received: &[F], reference: &[F]) -> Result<Vec<F>> {
    if received.is_empty() || reference.is_empty() {
        return Err(Error::invalid("cross-correlation inputs must be non-empty"));
    }
    if reference.len() > received.len() {
        return Err(Error::invalid(format!(
            "reference ({}) longer than received signal ({})",
            reference.len(),
            received.len()
        )));
    }
    let lags = received.len() - reference.len() + 1;
    if lags.saturating_mul(reference.len()) <= DIRECT_CORRELATION_LIMIT {
        Ok((0..lags)
            .map(|l| {
                received[l..l + reference.len()]
                    .iter()
                    .zip(reference)
                    .fold(F::zero(), |acc, (&r, &h)| acc + r * h)
            })
            .collect())
    } else {
        Ok(F::fft_correlate(received, reference))
    }
}

/// FFT correlation; the transform length only needs to cover `received`
/// because negative lags wrap into indices above the last wanted lag.
pub(crate) fn fft_correlate_impl<T: FftNum + Float>(received: &[T], reference: &[T]) -> Vec<T> {
    let n = received.len().next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut r = to_complex(received, n);
    let mut h = to_complex(reference, n);
    fwd.process(&mut r);
    fwd.process(&mut h);
    for (a, b) in r.iter_mut().zip(&h) {
        *a = *a * b.conj();
    }
    inv.process(&mut r);
    let scale = T::one() / T::from_usize(n).unwrap();
    let lags = received.len() - reference.len() + 1;
    r[..lags].iter().map(|c| c.re * scale).collect()
}

fn to_complex<T: FftNum + Float>(x: &[T], n: usize) -> Vec<Complex<T>> {
    let mut v = vec![Complex::new(T::zero(), T::zero()); n];
    for (d, &s) in v.iter_mut().zip(x) {
        d.re = s;
    }
    v
}

/// Index and value of the largest |value|; the earliest index wins ties.
pub fn peak_of<F: Real>(corr: &[F]) -> Option<(usize, F)> {
    let mut best: Option<(usize, F)> = None;
    for (i, &v) in corr.iter().enumerate() {
        if best.is_none_or(|(_, b)| v.abs() > b.abs()) {
            best = Some((i, v));
        }
    }
    best
}

/// Converts a peak lag to meters.
pub fn lag_to_distance<F: Real>(lag: usize, sample_rate: F, speed_of_sound: F) -> F {
    F::lit(lag as f64) / sample_rate * speed_of_sound
}

/// Range to one beacon from the global correlation maximum.
///
/// The receiver despreads with the beacon's code aligned to each candidate
/// lag and correlates against the un-coded hopped carrier; since the code is
/// constant over a chip this equals one correlation against the coded
/// reference burst, which is what is computed.
pub fn estimate_range<F: Real>(
    received: &SampledSignal<F>,
    beacon_index: usize,
    config: &WaveformConfig<F>,
    plan: &HopPlan<F>,
    code: &[i8],
    speed_of_sound: F,
) -> Result<RangeEstimate<F>> {
    let reference = generate_tx_signal(config, plan, code)?;
    estimate_range_with_reference(received, beacon_index, &reference, speed_of_sound)
}

pub fn estimate_range_with_reference<F: Real>(
    received: &SampledSignal<F>,
    beacon_index: usize,
    reference: &SampledSignal<F>,
    speed_of_sound: F,
) -> Result<RangeEstimate<F>> {
    if received.sample_rate != reference.sample_rate {
        return Err(Error::invalid("received and reference sample rates differ"));
    }
    let corr = cross_correlate(received, reference)?;
    range_from_correlation(&corr, beacon_index, received.sample_rate, speed_of_sound)
}

fn range_from_correlation<F: Real>(corr: &[F], beacon_index: usize, fs: F, c: F) -> Result<RangeEstimate<F>> {
    match peak_of(corr) {
        Some((lag, v)) if v != F::zero() => Ok(RangeEstimate {
            beacon_index,
            distance: lag_to_distance(lag, fs, c),
            peak_sample: lag,
            peak_value: v.abs(),
        }),
        _ => Err(Error::NoPeak),
    }
}

/// Matched filters for all beacons sharing one FFT of the received record.
pub struct MatchedFilterBank<F: Real + FftNum> {
    reference_len: usize,
    record_len: usize,
    sample_rate: F,
    fft_len: usize,
    forward: Arc<dyn Fft<F>>,
    inverse: Arc<dyn Fft<F>>,
    /// Conjugated reference spectra.
    spectra: Vec<Vec<Complex<F>>>,
}

impl<F: Real + FftNum> MatchedFilterBank<F> {
    /// `record_len` is the received record length the bank will be fed.
    pub fn new(references: &[SampledSignal<F>], record_len: usize) -> Result<Self> {
        let first = references.first().ok_or_else(|| Error::invalid("filter bank needs references"))?;
        let reference_len = first.len();
        if reference_len == 0 || references.iter().any(|r| r.len() != reference_len || r.sample_rate != first.sample_rate) {
            return Err(Error::invalid("references must be non-empty with equal length and sample rate"));
        }
        if reference_len > record_len {
            return Err(Error::invalid("reference longer than the received record"));
        }
        let fft_len = record_len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let spectra = references
            .iter()
            .map(|r| {
                let mut h = to_complex(&r.samples, fft_len);
                forward.process(&mut h);
                h.iter().map(|c| c.conj()).collect()
            })
            .collect();
        Ok(Self { reference_len, record_len, sample_rate: first.sample_rate, fft_len, forward, inverse, spectra })
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    /// Correlation of `received` against every reference.
    pub fn correlate_all(&self, received: &SampledSignal<F>) -> Result<Vec<Vec<F>>> {
        if received.len() != self.record_len || received.sample_rate != self.sample_rate {
            return Err(Error::invalid("received record does not match the filter bank"));
        }
        let mut spectrum = to_complex(&received.samples, self.fft_len);
        self.forward.process(&mut spectrum);
        let scale = F::one() / F::lit(self.fft_len as f64);
        let lags = self.record_len - self.reference_len + 1;
        Ok(self
            .spectra
            .iter()
            .map(|h| {
                let mut prod: Vec<Complex<F>> = spectrum.iter().zip(h).map(|(a, b)| *a * *b).collect();
                self.inverse.process(&mut prod);
                prod[..lags].iter().map(|c| c.re * scale).collect()
            })
            .collect())
    }

    /// One range estimate per reference.
    pub fn estimate_all(&self, received: &SampledSignal<F>, speed_of_sound: F) -> Result<Vec<RangeEstimate<F>>> {
        self.correlate_all(received)?
            .iter()
            .enumerate()
            .map(|(i, corr)| range_from_correlation(corr, i, self.sample_rate, speed_of_sound))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{random_bits, walsh_hadamard};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(received: &[f64], reference: &[f64]) -> Vec<f64> {
        (0..=received.len() - reference.len())
            .map(|l| (0..reference.len()).map(|k| received[k + l] * reference[k]).sum())
            .collect()
    }

    #[test]
    fn despread_is_an_involution_and_flags_partial_symbols() {
        let plan = HopPlan::<f64>::default_seeded(4, 2);
        let w = walsh_hadamard(4).unwrap();
        let cfg = WaveformConfig::with_bits(random_bits(4, 1), 1);
        let tx = generate_tx_signal(&cfg, &plan, w.row(1)).unwrap();
        let once = despread(&tx, w.row(1), &cfg).unwrap();
        assert!(!once.truncated);
        let twice = despread(&once.signal, w.row(1), &cfg).unwrap();
        assert_eq!(twice.signal, tx);

        let mut longer = tx.clone();
        longer.samples.extend(std::iter::repeat_n(0.5, 100));
        let d = despread(&longer, w.row(1), &cfg).unwrap();
        assert!(d.truncated);
        assert_eq!(d.signal.len(), tx.len());
    }

    #[test]
    fn despread_restores_uncoded_bpsk() {
        let plan = HopPlan::<f64>::default_seeded(6, 2);
        let w = walsh_hadamard(4).unwrap();
        let bits = random_bits(6, 3);
        for row in 0..4 {
            let cfg = WaveformConfig::with_bits(bits.clone(), row);
            let coded = generate_tx_signal(&cfg, &plan, w.row(row)).unwrap();
            let uncoded = generate_tx_signal(&cfg, &plan, &[1, 1, 1, 1]).unwrap();
            assert_eq!(despread(&coded, w.row(row), &cfg).unwrap().signal, uncoded);
        }
    }

    #[test]
    fn correlation_edge_cases() {
        let s = |v: Vec<f64>| SampledSignal::new(v, 1.0).unwrap();
        assert!(cross_correlate(&s(vec![]), &s(vec![1.0])).is_err());
        assert!(cross_correlate(&s(vec![1.0]), &s(vec![1.0, 2.0])).is_err());
        assert_eq!(cross_correlate(&s(vec![1.0, 2.0, 3.0]), &s(vec![1.0, 1.0])).unwrap(), vec![3.0, 5.0]);
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let received: Vec<f64> = (0..3000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reference: Vec<f64> = received[400..1400].to_vec();
        let fast = fft_correlate_impl(&received, &reference);
        let slow = naive(&received, &reference);
        let scale = slow.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
        assert_eq!(peak_of(&fast).unwrap().0, 400);
    }

    #[test]
    fn zero_record_has_no_peak() {
        let reference = SampledSignal::new(vec![1.0, -1.0, 0.5], 340_000.0).unwrap();
        let silent = SampledSignal::zeros(50, 340_000.0);
        assert!(matches!(estimate_range_with_reference(&silent, 0, &reference, 343.0), Err(Error::NoPeak)));
    }

    #[test]
    fn zero_delay_loopback_is_zero_distance() {
        let plan = HopPlan::<f64>::default_seeded(8, 4);
        let w = walsh_hadamard(4).unwrap();
        let cfg = WaveformConfig::with_bits(random_bits(8, 5), 3);
        let tx = generate_tx_signal(&cfg, &plan, w.row(3)).unwrap();
        let r = estimate_range(&tx, 3, &cfg, &plan, w.row(3), 343.0).unwrap();
        assert_eq!(r.peak_sample, 0);
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn bank_matches_single_estimates() {
        let plan = HopPlan::<f64>::default_seeded(8, 4);
        let w = walsh_hadamard(4).unwrap();
        let refs: Vec<_> = (0..4)
            .map(|i| generate_tx_signal(&WaveformConfig::with_bits(random_bits(8, i as u64), i), &plan, w.row(i)).unwrap())
            .collect();
        let mut rec = vec![0.0; refs[0].len() + 3000];
        for (i, r) in refs.iter().enumerate() {
            let shift = 300 + 500 * i;
            for (k, &v) in r.samples.iter().enumerate() {
                rec[k + shift] += v;
            }
        }
        let received = SampledSignal::new(rec, 340_000.0).unwrap();
        let bank = MatchedFilterBank::new(&refs, received.len()).unwrap();
        let all = bank.estimate_all(&received, 343.0).unwrap();
        for (i, est) in all.iter().enumerate() {
            let single = estimate_range_with_reference(&received, i, &refs[i], 343.0).unwrap();
            assert_eq!(est.peak_sample, single.peak_sample);
            assert_eq!(est.peak_sample, 300 + 500 * i);
        }
    }
}
