//! Monte Carlo driver tying the signal chain, solver and fusion together.

pub mod config;
pub mod output;
pub mod trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, MultipathProfile, Scene};
use crate::dop::{dop_at, DroneDomain};
use crate::error::{Error, Result};
use crate::fusion::{fuse_height, simulate_ceiling_echo_with_obstruction, FusionWeights};
use crate::geometry::{BeaconLayout, Point3, Room, N_BEACONS};
use crate::ranging::MatchedFilterBank;
use crate::seeds::split_seed;
use crate::solver::trilaterate;
use crate::waveform::{generate_tx_signal, random_bits, walsh_hadamard, SampledSignal, WaveformConfig};

pub use config::{LayoutSpec, SimConfig};
pub use trajectory::Trajectory;

type P3 = Point3<f64>;

/// Fewest trials per SNR accepted by [`sweep_snr`].
pub const MIN_SWEEP_TRIALS: usize = 30;

/// One localization attempt. Error fields are NaN when `ok` is false.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: u64,
    pub snr_db: f64,
    pub true_position: P3,
    pub estimated_position: P3,
    pub err_x: f64,
    pub err_y: f64,
    pub err_z: f64,
    pub err_xy: f64,
    pub err_3d: f64,
    /// Estimated minus true range, per beacon (m).
    pub range_errors: Vec<f64>,
    pub ok: bool,
    pub error: String,
}

impl TrialRecord {
    fn failed(id: u64, snr_db: f64, true_position: P3, range_errors: Vec<f64>, error: &Error) -> Self {
        let nan = f64::NAN;
        Self {
            id,
            snr_db,
            true_position,
            estimated_position: P3::new(nan, nan, nan),
            err_x: nan,
            err_y: nan,
            err_z: nan,
            err_xy: nan,
            err_3d: nan,
            range_errors,
            ok: false,
            error: error.to_string(),
        }
    }

    fn success(id: u64, snr_db: f64, true_position: P3, estimated_position: P3, range_errors: Vec<f64>) -> Self {
        let d = estimated_position - true_position;
        Self {
            id,
            snr_db,
            true_position,
            estimated_position,
            err_x: d.x.abs(),
            err_y: d.y.abs(),
            err_z: d.z.abs(),
            err_xy: d.x.hypot(d.y),
            err_3d: d.norm(),
            range_errors,
            ok: true,
            error: String::new(),
        }
    }
}

/// Per-beacon ranging diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeCheck {
    pub beacon: usize,
    pub true_distance: f64,
    pub estimated_distance: f64,
    pub lag: usize,
    /// Peak lag for the same geometry without noise or multipath.
    pub noiseless_lag: usize,
}

impl RangeCheck {
    pub fn matched(&self) -> bool {
        self.lag == self.noiseless_lag
    }
}

/// Precomputed transmit bursts and matched filters for one configuration.
pub struct Pipeline {
    pub config: SimConfig,
    pub room: Room<f64>,
    pub layout: BeaconLayout<f64>,
    pub domain: DroneDomain<f64>,
    tx: Vec<SampledSignal<f64>>,
    bank: MatchedFilterBank<f64>,
    profile: Option<MultipathProfile>,
    fusion_weights: FusionWeights<f64>,
}

impl Pipeline {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let plan = config.hop_plan()?;
        let walsh = walsh_hadamard(config.waveform.walsh_order)?;
        let layout = config.layout()?;
        let tx = (0..layout.len())
            .map(|i| {
                let bits = random_bits(config.waveform.burst_bits, split_seed(config.waveform.bits_seed, i as u64));
                let wf = WaveformConfig::new(config.waveform.sample_rate, config.waveform.symbol_duration, bits, i);
                generate_tx_signal(&wf, &plan, walsh.row(i))
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = (config.channel.tail_seconds * config.waveform.sample_rate).round() as usize;
        let bank = MatchedFilterBank::new(&tx, tx[0].len() + tail)?;
        Ok(Self {
            room: config.room()?,
            domain: config.drone_domain()?,
            profile: config.channel.multipath.then(|| config.channel.profile()),
            fusion_weights: config.fusion.effective_weights(config.channel.speed_of_sound)?,
            config: config.clone(),
            layout,
            tx,
            bank,
        })
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.config.channel.speed_of_sound
    }

    /// Receiver position for random trial `seed`.
    pub fn trial_position(&self, seed: u64) -> P3 {
        trajectory::uniform_in(&self.domain, &mut ChaCha8Rng::seed_from_u64(split_seed(seed, 0)))
    }

    fn receive(&self, scene: &Scene<f64>, snr_db: f64, seed: u64, multipath: bool) -> Result<SampledSignal<f64>> {
        let c = self.speed_of_sound();
        let mut model = self.config.channel.base_model(snr_db, split_seed(seed, 2));
        if let (true, Some(profile)) = (multipath, &self.profile) {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 1));
            model.taps_per_beacon = profile.draw(scene, c, &mut rng);
        }
        apply_channel(&self.tx, scene, &model)
    }

    fn ranges(&self, scene: &Scene<f64>, snr_db: f64, seed: u64, multipath: bool) -> Result<Vec<(usize, f64)>> {
        let rx = self.receive(scene, snr_db, seed, multipath)?;
        Ok(self.bank.estimate_all(&rx, self.speed_of_sound())?.into_iter().map(|r| (r.peak_sample, r.distance)).collect())
    }

    /// Full localization at `position`; module errors become a failed record.
    pub fn fix(&self, id: u64, position: P3, snr_db: f64, seed: u64) -> TrialRecord {
        let mut range_errors = vec![f64::NAN; self.layout.len()];
        let outcome = (|| {
            let scene = Scene::new(self.room, self.layout.clone(), position)?;
            let ranges: Vec<f64> = self.ranges(&scene, snr_db, seed, true)?.into_iter().map(|(_, d)| d).collect();
            for (i, r) in ranges.iter().enumerate() {
                range_errors[i] = r - scene.distance(i);
            }
            let mut est = trilaterate(self.layout.positions(), &ranges)?.position;
            if self.config.fusion.enabled {
                let f = &self.config.fusion;
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 3));
                let echo = simulate_ceiling_echo_with_obstruction(
                    position.z,
                    self.room.height(),
                    self.speed_of_sound(),
                    f.noise_std,
                    f.obstruction_probability,
                    &mut rng,
                )?;
                est.z = fuse_height(est.z, echo.derived_height, &self.fusion_weights);
            }
            Ok::<_, Error>(est)
        })();
        match outcome {
            Ok(est) => TrialRecord::success(id, snr_db, position, est, range_errors),
            Err(e) => TrialRecord::failed(id, snr_db, position, range_errors, &e),
        }
    }

    /// Peak lags with the configured channel against the clean single-path lags.
    pub fn range_check(&self, position: P3, snr_db: f64, seed: u64) -> Result<Vec<RangeCheck>> {
        let scene = Scene::new(self.room, self.layout.clone(), position)?;
        let clean = self.ranges(&scene, f64::INFINITY, seed, false)?;
        let noisy = self.ranges(&scene, snr_db, seed, true)?;
        Ok((0..self.layout.len())
            .map(|i| RangeCheck {
                beacon: i,
                true_distance: scene.distance(i),
                estimated_distance: noisy[i].1,
                lag: noisy[i].0,
                noiseless_lag: clean[i].0,
            })
            .collect())
    }

    /// `n` random-position fixes at one SNR, ids `0..n`, trial `i` seeded by `split_seed(master, i)`.
    pub fn random_fixes(&self, n: usize, snr_db: f64, master: u64) -> Vec<TrialRecord> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let seed = split_seed(master, i);
                self.fix(i, self.trial_position(seed), snr_db, seed)
            })
            .collect()
    }

    pub fn fixes_at(&self, position: P3, n: usize, snr_db: f64, master: u64) -> Vec<TrialRecord> {
        (0..n as u64).into_par_iter().map(|i| self.fix(i, position, snr_db, split_seed(master, i))).collect()
    }
}

/// Single fix with the configured SNR.
pub fn run_fix(config: &SimConfig, true_position: P3, rng_seed: u64) -> Result<TrialRecord> {
    let p = Pipeline::new(config)?;
    if !p.domain.contains(true_position) {
        return Err(Error::invalid(format!("position {true_position:?} lies outside the drone domain")));
    }
    Ok(p.fix(0, true_position, config.channel.snr_db, rng_seed))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, std: var.sqrt() }
    }
}

/// Error statistics over the successful records of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub snr_db: f64,
    pub trials: usize,
    pub failed: usize,
    pub err_x: Stat,
    pub err_y: Stat,
    pub err_z: Stat,
    pub err_xy: Stat,
    pub err_3d: Stat,
}

impl ErrorSummary {
    pub fn of(snr_db: f64, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.ok).collect();
        let stat = |f: fn(&TrialRecord) -> f64| Stat::of(ok.iter().map(|r| f(r)));
        Self {
            snr_db,
            trials: records.len(),
            failed: records.len() - ok.len(),
            err_x: stat(|r| r.err_x),
            err_y: stat(|r| r.err_y),
            err_z: stat(|r| r.err_z),
            err_xy: stat(|r| r.err_xy),
            err_3d: stat(|r| r.err_3d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<ErrorSummary>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

/// Random-position trials at each SNR. Positions and channel draws are shared
/// across SNRs so only the noise level changes between rows.
pub fn sweep_snr(config: &SimConfig, snr_list: &[f64], trials_per_point: usize) -> Result<SweepResult> {
    if trials_per_point < MIN_SWEEP_TRIALS {
        return Err(Error::invalid(format!("a sweep needs at least {MIN_SWEEP_TRIALS} trials per SNR, got {trials_per_point}")));
    }
    let p = Pipeline::new(config)?;
    let mut rows = Vec::with_capacity(snr_list.len());
    let mut records = Vec::with_capacity(snr_list.len() * trials_per_point);
    for &snr in snr_list {
        let batch = p.random_fixes(trials_per_point, snr, config.run.seed);
        rows.push(ErrorSummary::of(snr, &batch));
        records.extend(batch);
    }
    Ok(SweepResult { rows, records })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub fixes: usize,
    pub failed: usize,
    pub mean_err_z: f64,
    pub mean_err_xy: f64,
    pub mean_err_3d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRun {
    pub trajectory: Trajectory,
    pub summary: TrajectorySummary,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl Pipeline {
    /// Fix `i` along the path uses id `i` and seed `split_seed(seed, i)`.
    pub fn trajectory(&self, trajectory: &Trajectory, snr_db: f64, seed: u64) -> Result<TrajectoryRun> {
        let checked = Trajectory::new(trajectory.waypoints.clone(), trajectory.fix_spacing, &self.domain)?;
        let records: Vec<TrialRecord> = checked
            .fixes()
            .into_par_iter()
            .enumerate()
            .map(|(i, p)| self.fix(i as u64, p, snr_db, split_seed(seed, i as u64)))
            .collect();
        let s = ErrorSummary::of(snr_db, &records);
        Ok(TrajectoryRun {
            trajectory: checked,
            summary: TrajectorySummary {
                fixes: records.len(),
                failed: s.failed,
                mean_err_z: s.err_z.mean,
                mean_err_xy: s.err_xy.mean,
                mean_err_3d: s.err_3d.mean,
            },
            records,
        })
    }
}

/// One fix per trajectory point at the configured SNR.
pub fn run_trajectory(config: &SimConfig, trajectory: &Trajectory, seed: u64) -> Result<TrajectoryRun> {
    Pipeline::new(config)?.trajectory(trajectory, config.channel.snr_db, seed)
}

/// Seeded random trajectories, trajectory `k` drawn from `split_seed(seed, k)`.
pub fn random_trajectories(config: &SimConfig, count: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let domain = config.drone_domain()?;
    (0..count as u64)
        .map(|k| Trajectory::random(&domain, config.run.waypoints, config.run.fix_spacing, split_seed(seed, k)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DopMapRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// NaN at degenerate points.
    pub hdop: f64,
    pub vdop: f64,
    pub gdop: f64,
}

pub fn dop_map(layout: &BeaconLayout<f64>, domain: &DroneDomain<f64>) -> Vec<DopMapRow> {
    domain
        .points
        .par_iter()
        .map(|&p| {
            let (hdop, vdop, gdop) = match dop_at(layout.positions(), p) {
                Ok(r) => (r.hdop, r.vdop, r.gdop),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            DopMapRow { x: p.x, y: p.y, z: p.z, hdop, vdop, gdop }
        })
        .collect()
}

const _: () = assert!(N_BEACONS == 4);
