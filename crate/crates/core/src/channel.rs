//! Acoustic propagation: direct-path delay, discrete multipath taps and AWGN.
//!
//! The received record is
//! `r[n] = Σᵢ gᵢ·sᵢ[n − Dᵢ] + Σᵢ Σⱼ αᵢⱼ(n)·sᵢ[n − Dᵢⱼ] + w[n]`
//! with every delay rounded to the nearest sample and `w` white Gaussian
//! noise scaled to the requested SNR.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BeaconLayout, Point3, Room};
use crate::scalar::Real;
use crate::waveform::SampledSignal;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
/// Listening time appended after the burst so delayed copies are not cut off.
pub const DEFAULT_TAIL_SECONDS: f64 = 0.04;

/// Sinusoids per tap in the sum-of-sinusoids fading process.
const FADING_OSCILLATORS: usize = 8;

/// One reflected path: absolute delay and real amplitude gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipathTap<F> {
    pub delay: F,
    pub gain: F,
}

/// Room, beacons and receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene<F: Real> {
    pub room: Room<F>,
    pub beacons: BeaconLayout<F>,
    pub receiver: Point3<F>,
}

impl<F: Real> Scene<F> {
    /// Beacons may sit on walls or ceiling; the receiver must be strictly inside.
    pub fn new(room: Room<F>, beacons: BeaconLayout<F>, receiver: Point3<F>) -> Result<Self> {
        if !room.contains_strictly(receiver) {
            return Err(Error::invalid(format!("receiver {receiver:?} is not strictly inside the room")));
        }
        if let Some((i, p)) = beacons.positions().iter().enumerate().find(|(_, &p)| !room.contains(p)) {
            return Err(Error::invalid(format!("beacon {i} at {p:?} lies outside the room")));
        }
        if beacons.positions().contains(&receiver) {
            return Err(Error::invalid("receiver coincides with a beacon"));
        }
        Ok(Self { room, beacons, receiver })
    }

    pub fn distance(&self, beacon_index: usize) -> F {
        self.beacons.positions()[beacon_index].distance(self.receiver)
    }
}

/// One-way propagation time from beacon `beacon_index` to the receiver.
pub fn direct_delay<F: Real>(scene: &Scene<F>, beacon_index: usize, c: F) -> F {
    scene.distance(beacon_index) / c
}

/// Channel realization applied to one burst.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel<F> {
    /// One tap list per beacon; an empty outer list means no multipath.
    pub taps_per_beacon: Vec<Vec<MultipathTap<F>>>,
    /// Total signal power over noise power in dB; `+∞` disables noise.
    pub snr_db: F,
    pub speed_of_sound: F,
    pub rng_seed: u64,
    /// Maximum Doppler shift of the tap fading processes (Hz); 0 keeps taps static.
    pub max_doppler_hz: F,
    /// Scale the direct path by `min(1, 1 m / distance)`.
    pub distance_attenuation: bool,
    pub tail_seconds: F,
}

impl<F: Real> ChannelModel<F> {
    /// Single-path, noiseless channel.
    pub fn ideal(speed_of_sound: F) -> Self {
        Self {
            taps_per_beacon: Vec::new(),
            snr_db: F::infinity(),
            speed_of_sound,
            rng_seed: 0,
            max_doppler_hz: F::zero(),
            distance_attenuation: false,
            tail_seconds: F::lit(DEFAULT_TAIL_SECONDS),
        }
    }

    pub fn with_snr(mut self, snr_db: F) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_taps(mut self, taps: Vec<Vec<MultipathTap<F>>>) -> Self {
        self.taps_per_beacon = taps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self, scene: &Scene<F>) -> Result<()> {
        if !(self.speed_of_sound > F::zero()) || !self.speed_of_sound.is_finite() {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        if self.snr_db.is_nan() || self.snr_db == F::neg_infinity() {
            return Err(Error::invalid("SNR must be a number or +inf"));
        }
        if !(self.tail_seconds >= F::zero()) || !(self.max_doppler_hz >= F::zero()) {
            return Err(Error::invalid("tail and Doppler must be non-negative"));
        }
        if !self.taps_per_beacon.is_empty() && self.taps_per_beacon.len() != scene.beacons.len() {
            return Err(Error::invalid(format!(
                "{} tap lists for {} beacons",
                self.taps_per_beacon.len(),
                scene.beacons.len()
            )));
        }
        for (i, taps) in self.taps_per_beacon.iter().enumerate() {
            let direct = direct_delay(scene, i, self.speed_of_sound);
            for t in taps {
                if !(t.delay > direct) {
                    return Err(Error::invalid(format!(
                        "beacon {i}: tap delay {} s does not exceed the direct delay {} s",
                        t.delay, direct
                    )));
                }
                if !(t.gain.abs() < F::one()) {
                    return Err(Error::invalid(format!("beacon {i}: tap gain {} has magnitude ≥ 1", t.gain)));
                }
            }
        }
        Ok(())
    }
}

/// Statistical description from which per-trial taps are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipathProfile {
    pub taps: usize,
    pub min_excess_delay: f64,
    pub max_excess_delay: f64,
    /// Mean power of the earliest tap relative to the direct path (dB).
    pub first_tap_db: f64,
    /// Time constant of the exponential power-delay profile (s).
    pub decay: f64,
    /// Rayleigh magnitudes are redrawn until strictly below this bound.
    pub max_gain: f64,
}

impl Default for MultipathProfile {
    fn default() -> Self {
        Self {
            taps: 5,
            min_excess_delay: 3e-3,
            max_excess_delay: 12e-3,
            first_tap_db: -6.0,
            decay: 4e-3,
            max_gain: 0.95,
        }
    }
}

impl MultipathProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_excess_delay > 0.0 && self.max_excess_delay >= self.min_excess_delay) {
            return Err(Error::invalid("excess delays must satisfy 0 < min ≤ max"));
        }
        if !(self.decay > 0.0) {
            return Err(Error::invalid("power-delay decay constant must be positive"));
        }
        if !(self.max_gain > 0.0 && self.max_gain < 1.0) {
            return Err(Error::invalid("maximum tap gain must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Draws one tap list per beacon. Excess delays are uniform, gains are
    /// Rayleigh in magnitude with a random sign and mean power following
    /// `P(Δ) = 10^(first_tap_db/10) · exp(−(Δ − Δ₀)/decay)`, Δ₀ the earliest tap.
    pub fn draw<F: Real, R: Rng + ?Sized>(&self, scene: &Scene<F>, c: F, rng: &mut R) -> Vec<Vec<MultipathTap<F>>> {
        let first_power = 10f64.powf(self.first_tap_db / 10.0);
        (0..scene.beacons.len())
            .map(|i| {
                let direct = direct_delay(scene, i, c).to_f64_lossy();
                let mut excess: Vec<f64> = (0..self.taps)
                    .map(|_| {
                        if self.max_excess_delay > self.min_excess_delay {
                            rng.random_range(self.min_excess_delay..=self.max_excess_delay)
                        } else {
                            self.min_excess_delay
                        }
                    })
                    .collect();
                excess.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let first = excess.first().copied().unwrap_or(0.0);
                excess
                    .into_iter()
                    .map(|dx| {
                        let power = first_power * (-(dx - first) / self.decay).exp();
                        let magnitude = loop {
                            // Rayleigh with E|α|² = power.
                            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                            let m = (-power * u.ln()).sqrt();
                            if m < self.max_gain {
                                break m;
                            }
                        };
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        MultipathTap { delay: F::lit(direct + dx), gain: F::lit(sign * magnitude) }
                    })
                    .collect()
            })
            .collect()
    }
}

fn delay_in_samples<F: Real>(delay: F, fs: F) -> usize {
    (delay * fs).round().to_f64_lossy().max(0.0) as usize
}

/// Adds `gain(n) · src[n − shift]` into `out`, truncating at the record end.
fn add_delayed<F: Real>(out: &mut [F], src: &[F], shift: usize, gain: impl Fn(usize) -> F) {
    if shift >= out.len() {
        return;
    }
    for (k, (o, &s)) in out[shift..].iter_mut().zip(src).enumerate() {
        *o += gain(k + shift) * s;
    }
}

/// Real sum-of-sinusoids fading process with unit mean-square value.
struct Fading {
    freqs: Vec<f64>,
    phases: Vec<f64>,
}

impl Fading {
    fn draw<R: Rng + ?Sized>(max_doppler: f64, rng: &mut R) -> Self {
        let (freqs, phases) = (0..FADING_OSCILLATORS)
            .map(|_| {
                let theta = rng.random_range(0.0..2.0 * PI);
                (max_doppler * theta.cos(), rng.random_range(0.0..2.0 * PI))
            })
            .unzip();
        Self { freqs, phases }
    }

    fn at(&self, t: f64) -> f64 {
        let norm = (2.0 / FADING_OSCILLATORS as f64).sqrt();
        norm * self
            .freqs
            .iter()
            .zip(&self.phases)
            .map(|(f, p)| (2.0 * PI * f * t + p).cos())
            .sum::<f64>()
    }
}

/// Propagates the beacon bursts through `model` and sums them at the receiver.
///
/// The output spans the longest input plus `model.tail_seconds`. Noise power
/// is set from the noiseless composite's power over the burst length.
pub fn apply_channel<F: Real>(tx_signals: &[SampledSignal<F>], scene: &Scene<F>, model: &ChannelModel<F>) -> Result<SampledSignal<F>> {
    if tx_signals.len() != scene.beacons.len() {
        return Err(Error::invalid(format!(
            "{} transmit signals for {} beacons",
            tx_signals.len(),
            scene.beacons.len()
        )));
    }
    model.validate(scene)?;
    let fs = tx_signals[0].sample_rate;
    if tx_signals.iter().any(|s| s.sample_rate != fs) {
        return Err(Error::invalid("transmit signals have mismatched sample rates"));
    }
    let burst_len = tx_signals.iter().map(SampledSignal::len).max().unwrap_or(0);
    let out_len = burst_len + delay_in_samples(model.tail_seconds, fs);
    let mut out = vec![F::zero(); out_len];

    let mut fade_rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    fade_rng.set_stream(1);
    let doppler = model.max_doppler_hz.to_f64_lossy();
    let fs64 = fs.to_f64_lossy();

    for (i, tx) in tx_signals.iter().enumerate() {
        let distance = scene.distance(i);
        let g0 = if model.distance_attenuation { F::one().min(F::one() / distance) } else { F::one() };
        let shift = delay_in_samples(distance / model.speed_of_sound, fs);
        add_delayed(&mut out, &tx.samples, shift, |_| g0);

        if let Some(taps) = model.taps_per_beacon.get(i) {
            for tap in taps {
                let shift = delay_in_samples(tap.delay, fs);
                let gain = g0 * tap.gain;
                if doppler > 0.0 {
                    let fading = Fading::draw(doppler, &mut fade_rng);
                    add_delayed(&mut out, &tx.samples, shift, |n| gain * F::lit(fading.at(n as f64 / fs64)));
                } else {
                    add_delayed(&mut out, &tx.samples, shift, |_| gain);
                }
            }
        }
    }

    if model.snr_db.is_finite() && burst_len > 0 {
        let energy = out.iter().fold(0.0f64, |acc, v| acc + v.to_f64_lossy().powi(2));
        let signal_power = energy / burst_len as f64;
        let sigma = (signal_power / 10f64.powf(model.snr_db.to_f64_lossy() / 10.0)).sqrt();
        let mut noise_rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
        let sigma = F::lit(sigma);
        for v in out.iter_mut() {
            *v += sigma * F::std_normal(&mut noise_rng);
        }
    }
    SampledSignal::new(out, fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{generate_tx_signal, random_bits, walsh_hadamard, HopPlan, WaveformConfig};

    fn room() -> Room<f64> {
        Room::default_room()
    }

    fn single_source(samples: Vec<f64>) -> SampledSignal<f64> {
        SampledSignal::new(samples, 340_000.0).unwrap()
    }

    fn burst(bits: usize, row: usize, seed: u64) -> SampledSignal<f64> {
        let plan = HopPlan::default_seeded(bits, 5);
        let w = walsh_hadamard(4).unwrap();
        let cfg = WaveformConfig::with_bits(random_bits(bits, seed), row);
        generate_tx_signal(&cfg, &plan, w.row(row)).unwrap()
    }

    fn silent(len: usize) -> SampledSignal<f64> {
        SampledSignal::zeros(len, 340_000.0)
    }

    #[test]
    fn direct_delay_examples() {
        let layout = BeaconLayout::from_coords([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 4.0]]);
        let scene = Scene::new(room(), layout, Point3::from_f64(0.001, 0.001, 3.43)).unwrap();
        let d = direct_delay(&scene, 0, 343.0);
        assert!((d - (0.001f64.powi(2) * 2.0 + 3.43f64.powi(2)).sqrt() / 343.0).abs() < 1e-15);
        assert!((d - 0.01).abs() < 1e-7);

        let scene = Scene::new(room(), BeaconLayout::original(), Point3::from_f64(2.5, 2.5, 1.5)).unwrap();
        let d = direct_delay(&scene, 0, 343.0);
        assert!((d - 2.5 / 343.0).abs() < 1e-15);
        assert!((d * 1e3 - 7.289).abs() < 1e-3);
    }

    #[test]
    fn scene_rejects_receiver_outside_or_on_beacon() {
        assert!(Scene::new(room(), BeaconLayout::original(), Point3::from_f64(2.5, 2.5, 4.0)).is_err());
        assert!(Scene::new(room(), BeaconLayout::original(), Point3::from_f64(2.5, 0.0, 1.5)).is_err());
        assert!(Scene::new(room(), BeaconLayout::original(), Point3::from_f64(6.0, 1.0, 1.0)).is_err());
    }

    fn scene_at_distance(distance: f64) -> Scene<f64> {
        // Beacon 0 on the floor corner line, receiver straight above it.
        let layout = BeaconLayout::from_coords([[1.0, 1.0, 0.0], [5.0, 0.0, 4.0], [0.0, 5.0, 4.0], [5.0, 5.0, 4.0]]);
        Scene::new(room(), layout, Point3::from_f64(1.0, 1.0, distance)).unwrap()
    }

    #[test]
    fn pure_delay_shifts_and_zero_pads() {
        // 500 samples at 340 kHz and 343 m/s.
        let distance = 500.0 / 340_000.0 * 343.0;
        let scene = scene_at_distance(distance);
        let x: Vec<f64> = (0..2000).map(|k| ((k as f64) * 0.37).sin() + 0.1).collect();
        let tx = vec![single_source(x.clone()), silent(2000), silent(2000), silent(2000)];
        let out = apply_channel(&tx, &scene, &ChannelModel::ideal(343.0)).unwrap();
        assert_eq!(out.len(), 2000 + (0.04f64 * 340_000.0).round() as usize);
        assert!(out.samples[..500].iter().all(|&v| v == 0.0));
        assert_eq!(&out.samples[500..2500], &x[..]);
        assert!(out.samples[2500..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn snr_sets_noise_power() {
        let scene = scene_at_distance(1.0);
        let len = 200_000;
        let x: Vec<f64> = (0..len).map(|k| (k as f64 * 0.2).sin()).collect();
        let tx = vec![single_source(x), silent(len), silent(len), silent(len)];
        let clean = apply_channel(&tx, &scene, &ChannelModel::ideal(343.0)).unwrap();
        let noisy = apply_channel(&tx, &scene, &ChannelModel::ideal(343.0).with_snr(10.0).with_seed(3)).unwrap();
        let signal_power = clean.energy() / len as f64;
        let noise_power = clean
            .samples
            .iter()
            .zip(&noisy.samples)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            / clean.len() as f64;
        let target = signal_power / 10.0;
        assert!((noise_power - target).abs() < 0.05 * target, "{noise_power} vs {target}");
    }

    #[test]
    fn tap_energy_lands_after_the_direct_symbol() {
        let scene = scene_at_distance(1.0);
        let sym = burst(1, 0, 1);
        let direct = direct_delay(&scene, 0, 343.0);
        let tap = MultipathTap { delay: direct + 3e-3, gain: 0.5 };
        let model = ChannelModel::ideal(343.0).with_taps(vec![vec![tap], vec![], vec![], vec![]]);
        let tx = vec![sym.clone(), silent(680), silent(680), silent(680)];
        let clean = apply_channel(&tx, &scene, &ChannelModel::ideal(343.0)).unwrap();
        let with_tap = apply_channel(&tx, &scene, &model).unwrap();
        let direct_start = (direct * 340_000.0).round() as usize;
        let direct_end = direct_start + 680;
        let tap_start = ((direct + 3e-3) * 340_000.0).round() as usize;
        assert!(tap_start >= direct_end);
        let diff: Vec<f64> = clean.samples.iter().zip(&with_tap.samples).map(|(a, b)| b - a).collect();
        assert!(diff[..tap_start].iter().all(|&v| v == 0.0));
        let tail: f64 = diff[tap_start..].iter().map(|v| v * v).sum();
        assert!((tail - 0.25 * sym.energy()).abs() < 1e-9);
    }

    #[test]
    fn linear_and_deterministic() {
        let scene = Scene::new(room(), BeaconLayout::original(), Point3::from_f64(2.0, 2.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let taps = MultipathProfile::default().draw(&scene, 343.0, &mut rng);
        let model = ChannelModel::ideal(343.0).with_taps(taps);
        let a: Vec<_> = (0..4).map(|i| burst(8, i, 10 + i as u64)).collect();
        let b: Vec<_> = (0..4).map(|i| burst(8, (i + 1) % 4, 20 + i as u64)).collect();
        let sum: Vec<_> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| single_source(x.samples.iter().zip(&y.samples).map(|(p, q)| p + q).collect()))
            .collect();
        let ra = apply_channel(&a, &scene, &model).unwrap();
        let rb = apply_channel(&b, &scene, &model).unwrap();
        let rs = apply_channel(&sum, &scene, &model).unwrap();
        for k in 0..rs.len() {
            assert!((rs.samples[k] - ra.samples[k] - rb.samples[k]).abs() < 1e-12);
        }

        let noisy = model.clone().with_snr(5.0).with_seed(77);
        assert_eq!(apply_channel(&a, &scene, &noisy).unwrap(), apply_channel(&a, &scene, &noisy).unwrap());
        assert_ne!(
            apply_channel(&a, &scene, &noisy).unwrap(),
            apply_channel(&a, &scene, &noisy.clone().with_seed(78)).unwrap()
        );
    }

    #[test]
    fn energy_is_preserved_without_taps_or_noise() {
        let scene = Scene::new(room(), BeaconLayout::original(), Point3::from_f64(4.0, 4.0, 0.5)).unwrap();
        for i in 0..4 {
            let mut tx: Vec<_> = (0..4).map(|_| silent(32 * 680)).collect();
            tx[i] = burst(32, i, 99);
            let out = apply_channel(&tx, &scene, &ChannelModel::ideal(343.0)).unwrap();
            assert!((out.energy() - tx[i].energy()).abs() < 1e-9 * tx[i].energy());
        }
        // A tail shorter than the propagation delay truncates the record.
        let mut short = ChannelModel::ideal(343.0);
        short.tail_seconds = 0.0;
        let tx = vec![burst(32, 0, 1), silent(32 * 680), silent(32 * 680), silent(32 * 680)];
        let out = apply_channel(&tx, &scene, &short).unwrap();
        assert!(out.energy() < tx[0].energy());
    }

    #[test]
    fn drawn_taps_respect_profile() {
        let scene = Scene::new(room(), BeaconLayout::original(), Point3::from_f64(2.0, 3.0, 1.0)).unwrap();
        let profile = MultipathProfile::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut first_power = 0.0;
        let trials = 4000;
        for _ in 0..trials {
            let taps = profile.draw(&scene, 343.0, &mut rng);
            assert_eq!(taps.len(), 4);
            for (i, list) in taps.iter().enumerate() {
                let direct = direct_delay(&scene, i, 343.0);
                assert_eq!(list.len(), 5);
                for t in list {
                    let excess = t.delay - direct;
                    assert!((3e-3 - 1e-12..=12e-3 + 1e-12).contains(&excess));
                    assert!(t.gain.abs() < 0.95);
                }
                first_power += list[0].gain.powi(2);
            }
        }
        // Rayleigh power p conditioned on |α| < a: E|α|² = p − a²q/(1−q), q = e^{−a²/p}.
        let (p, a2) = (0.25f64, 0.95f64 * 0.95);
        let q = (-a2 / p).exp();
        let expected = p - a2 * q / (1.0 - q);
        let mean = first_power / (4 * trials) as f64;
        assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn rejects_mismatched_rates_and_bad_taps() {
        let scene = scene_at_distance(1.0);
        let tx = vec![single_source(vec![1.0; 10]), SampledSignal::zeros(10, 44_100.0), silent(10), silent(10)];
        assert!(apply_channel(&tx, &scene, &ChannelModel::ideal(343.0)).is_err());
        let tx = vec![single_source(vec![1.0; 10]), silent(10), silent(10), silent(10)];
        let early = MultipathTap { delay: 1e-6, gain: 0.5 };
        let model = ChannelModel::ideal(343.0).with_taps(vec![vec![early], vec![], vec![], vec![]]);
        assert!(apply_channel(&tx, &scene, &model).is_err());
    }

    #[test]
    fn doppler_fading_keeps_direct_path_static() {
        let scene = scene_at_distance(1.0);
        let sym = burst(4, 0, 1);
        let tx = vec![sym, silent(4 * 680), silent(4 * 680), silent(4 * 680)];
        let mut model = ChannelModel::ideal(343.0);
        model.max_doppler_hz = 5.0;
        assert_eq!(
            apply_channel(&tx, &scene, &model).unwrap(),
            apply_channel(&tx, &scene, &ChannelModel::ideal(343.0)).unwrap()
        );
        let direct = direct_delay(&scene, 0, 343.0);
        let taps = vec![vec![MultipathTap { delay: direct + 3e-3, gain: 0.5 }], vec![], vec![], vec![]];
        let faded = apply_channel(&tx, &scene, &model.clone().with_taps(taps.clone())).unwrap();
        let fixed = apply_channel(&tx, &scene, &ChannelModel::ideal(343.0).with_taps(taps)).unwrap();
        assert_ne!(faded, fixed);
    }
}
