//! Simulation configuration file.
//!
//! Every section and key is optional; omitted values take the defaults of the
//! underlying modules. Unknown keys are rejected. Errors carry the 1-based
//! line of the offending key when it can be located.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, MultipathProfile, DEFAULT_SPEED_OF_SOUND, DEFAULT_TAIL_SECONDS};
use crate::dop::DroneDomain;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::geometry::{BeaconLayout, Point3, Room};
use crate::placement::{BeaconDomain, PlacementProblem};
use crate::waveform::{
    HopPlan, DEFAULT_BURST_BITS, DEFAULT_CENTERS_HZ, DEFAULT_CHANNEL_BANDWIDTH_HZ, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_SYMBOL_DURATION_S,
    DEFAULT_WALSH_ORDER,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutSpec {
    /// `"original"` or `"optimized"`.
    Named(String),
    Coords(Vec<[f64; 3]>),
}

impl LayoutSpec {
    pub fn resolve(&self) -> Result<BeaconLayout<f64>> {
        match self {
            LayoutSpec::Named(n) if n == "original" => Ok(BeaconLayout::original()),
            LayoutSpec::Named(n) if n == "optimized" => Ok(BeaconLayout::optimized()),
            LayoutSpec::Named(n) => Err(Error::invalid(format!("unknown layout {n:?}; expected \"original\", \"optimized\" or coordinates"))),
            LayoutSpec::Coords(c) => BeaconLayout::new(c.iter().map(|&a| Point3::from_array(a)).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub room: [f64; 3],
    pub layout: LayoutSpec,
    pub drone_min: [f64; 3],
    pub drone_max: [f64; 3],
    pub drone_resolution: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            room: [5.0, 5.0, 4.0],
            layout: LayoutSpec::Named("original".into()),
            drone_min: [0.5, 0.5, 0.5],
            drone_max: [4.5, 4.5, 3.0],
            drone_resolution: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformSection {
    pub center_frequencies: Vec<f64>,
    pub bandwidth: f64,
    pub sample_rate: f64,
    pub symbol_duration: f64,
    pub walsh_order: usize,
    pub burst_bits: usize,
    pub hop_seed: u64,
    /// Seeds the known data pattern each beacon transmits.
    pub bits_seed: u64,
    pub carrier_phase: f64,
}

impl Default for WaveformSection {
    fn default() -> Self {
        Self {
            center_frequencies: DEFAULT_CENTERS_HZ.to_vec(),
            bandwidth: DEFAULT_CHANNEL_BANDWIDTH_HZ,
            sample_rate: DEFAULT_SAMPLE_RATE_HZ,
            symbol_duration: DEFAULT_SYMBOL_DURATION_S,
            walsh_order: DEFAULT_WALSH_ORDER,
            burst_bits: DEFAULT_BURST_BITS,
            hop_seed: 1,
            bits_seed: 2,
            carrier_phase: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub speed_of_sound: f64,
    /// SNR for single-SNR runs (dB); `inf` is accepted as a string.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub multipath: bool,
    pub taps: usize,
    pub min_excess_delay: f64,
    pub max_excess_delay: f64,
    pub first_tap_db: f64,
    pub tap_decay: f64,
    pub max_tap_gain: f64,
    pub max_doppler_hz: f64,
    pub distance_attenuation: bool,
    pub tail_seconds: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let p = MultipathProfile::default();
        Self {
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            snr_db: 20.0,
            multipath: true,
            taps: p.taps,
            min_excess_delay: p.min_excess_delay,
            max_excess_delay: p.max_excess_delay,
            first_tap_db: p.first_tap_db,
            tap_decay: p.decay,
            max_tap_gain: p.max_gain,
            max_doppler_hz: 0.0,
            distance_attenuation: false,
            tail_seconds: DEFAULT_TAIL_SECONDS,
        }
    }
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" || t == "+inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

impl ChannelSection {
    pub fn profile(&self) -> MultipathProfile {
        MultipathProfile {
            taps: self.taps,
            min_excess_delay: self.min_excess_delay,
            max_excess_delay: self.max_excess_delay,
            first_tap_db: self.first_tap_db,
            decay: self.tap_decay,
            max_gain: self.max_tap_gain,
        }
    }

    /// Channel model without taps; taps are drawn per trial.
    pub fn base_model(&self, snr_db: f64, seed: u64) -> ChannelModel<f64> {
        let mut m = ChannelModel::ideal(self.speed_of_sound).with_snr(snr_db).with_seed(seed);
        m.max_doppler_hz = self.max_doppler_hz;
        m.distance_attenuation = self.distance_attenuation;
        m.tail_seconds = self.tail_seconds;
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementSection {
    pub hdop_tolerance: f64,
    pub vdop_tolerance: f64,
    pub population: usize,
    pub parents: usize,
    pub offspring: usize,
    pub iterations: usize,
    pub max_restarts: usize,
    pub min_separation: f64,
    pub beacon_resolution: f64,
    pub mutation: bool,
    pub mutation_rate: f64,
}

impl Default for PlacementSection {
    fn default() -> Self {
        let p = PlacementProblem::default();
        Self {
            hdop_tolerance: p.hdop_tolerance,
            vdop_tolerance: p.vdop_tolerance,
            population: p.population,
            parents: p.parents,
            offspring: p.offspring,
            iterations: p.iterations,
            max_restarts: p.max_restarts,
            min_separation: p.min_separation,
            beacon_resolution: p.beacon_domain.resolution,
            mutation: false,
            mutation_rate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    pub snr_list: Vec<f64>,
    /// Fixed receiver position for `simulate`; random positions when absent.
    pub position: Option<[f64; 3]>,
    pub trajectories: usize,
    pub waypoints: usize,
    pub fix_spacing: f64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 200,
            snr_list: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            position: None,
            trajectories: 7,
            waypoints: 5,
            fix_spacing: 0.25,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub scene: SceneSection,
    pub waveform: WaveformSection,
    pub channel: ChannelSection,
    pub fusion: FusionConfig<f64>,
    pub placement: PlacementSection,
    pub run: RunSection,
}

fn invalid_at(section: &'static str, key: &'static str) -> impl Fn(String) -> (String, String, String) {
    move |msg| (section.to_string(), key.to_string(), msg)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.check().map_err(|(section, key, message)| Error::Config { line: line_of_key(text, &section, &key), message })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, _, message)| Error::Config { line: None, message })
    }

    /// Semantic checks; the error names the section and key to blame.
    fn check(&self) -> std::result::Result<(), (String, String, String)> {
        let at = |s: &'static str, k: &'static str| invalid_at(s, k);
        let room = self.room().map_err(|e| at("scene", "room")(e.to_string()))?;
        self.layout().map_err(|e| at("scene", "layout")(e.to_string()))?;
        if let Some(p) = self.layout().ok().and_then(|l| l.positions().iter().copied().find(|&p| !room.contains(p))) {
            return Err(at("scene", "layout")(format!("beacon {p:?} lies outside the room")));
        }
        self.drone_domain().map_err(|e| at("scene", "drone_min")(e.to_string()))?;
        self.hop_plan().map_err(|e| at("waveform", "center_frequencies")(e.to_string()))?;
        if self.waveform.walsh_order < 4 || !self.waveform.walsh_order.is_power_of_two() {
            return Err(at("waveform", "walsh_order")("Walsh order must be a power of two, at least 4 for four beacons".into()));
        }
        let probe = crate::waveform::WaveformConfig::new(self.waveform.sample_rate, self.waveform.symbol_duration, vec![1; self.waveform.burst_bits], 0);
        probe
            .validate(&self.hop_plan().expect("checked above"), self.waveform.walsh_order)
            .map_err(|e| at("waveform", "sample_rate")(e.to_string()))?;
        if self.waveform.burst_bits == 0 {
            return Err(at("waveform", "burst_bits")("burst must carry at least one bit".into()));
        }
        let c = &self.channel;
        if !(c.speed_of_sound > 0.0 && c.speed_of_sound.is_finite()) {
            return Err(at("channel", "speed_of_sound")("speed of sound must be positive".into()));
        }
        if c.snr_db.is_nan() || c.snr_db == f64::NEG_INFINITY {
            return Err(at("channel", "snr_db")("SNR must be a number or \"inf\"".into()));
        }
        if c.multipath {
            c.profile().validate().map_err(|e| at("channel", "taps")(e.to_string()))?;
        }
        if !(c.tail_seconds >= 0.0) || !(c.max_doppler_hz >= 0.0) {
            return Err(at("channel", "tail_seconds")("tail and Doppler must be non-negative".into()));
        }
        self.fusion.validate().map_err(|e| at("fusion", "weights")(e.to_string()))?;
        self.placement_problem().map_err(|e| at("placement", "population")(e.to_string()))?;
        if self.run.trials == 0 {
            return Err(at("run", "trials")("trials must be positive".into()));
        }
        if self.run.snr_list.iter().any(|s| s.is_nan()) {
            return Err(at("run", "snr_list")("SNR values must be numbers".into()));
        }
        if let Some(p) = self.run.position {
            let d = self.drone_domain().expect("checked above");
            if !d.contains(Point3::from_array(p)) {
                return Err(at("run", "position")(format!("position {p:?} lies outside the drone domain")));
            }
        }
        if !(self.run.fix_spacing > 0.0) {
            return Err(at("run", "fix_spacing")("fix spacing must be positive".into()));
        }
        if self.run.waypoints == 0 {
            return Err(at("run", "waypoints")("a trajectory needs at least one waypoint".into()));
        }
        Ok(())
    }

    pub fn room(&self) -> Result<Room<f64>> {
        Room::new(Point3::from_array(self.scene.room))
    }

    pub fn layout(&self) -> Result<BeaconLayout<f64>> {
        self.scene.layout.resolve()
    }

    pub fn drone_domain(&self) -> Result<DroneDomain<f64>> {
        DroneDomain::new(
            &self.room()?,
            Point3::from_array(self.scene.drone_min),
            Point3::from_array(self.scene.drone_max),
            self.scene.drone_resolution,
        )
    }

    /// Hop plan covering the whole burst.
    pub fn hop_plan(&self) -> Result<HopPlan<f64>> {
        let w = &self.waveform;
        HopPlan::seeded(w.center_frequencies.clone(), w.bandwidth, w.burst_bits, w.hop_seed, w.carrier_phase)
    }

    pub fn placement_problem(&self) -> Result<PlacementProblem> {
        let p = &self.placement;
        let problem = PlacementProblem {
            drone_domain: self.drone_domain()?,
            beacon_domain: BeaconDomain::new(self.room()?, p.beacon_resolution)?,
            hdop_tolerance: p.hdop_tolerance,
            vdop_tolerance: p.vdop_tolerance,
            population: p.population,
            parents: p.parents,
            offspring: p.offspring,
            iterations: p.iterations,
            max_restarts: p.max_restarts,
            min_separation: p.min_separation,
            mutation_rate: p.mutation.then_some(p.mutation_rate),
            rng_seed: self.run.seed,
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, else the section header's line.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = SimConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!(cfg.drone_domain().unwrap().points.len(), 486);
        assert_eq!(cfg.waveform.center_frequencies.len(), 6);
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        let noiseless = SimConfig { channel: ChannelSection { snr_db: f64::INFINITY, ..Default::default() }, ..Default::default() };
        assert_eq!(SimConfig::from_toml_str(&noiseless.to_toml_string()).unwrap(), noiseless);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "[scene]\nroom = [5, 5, 4]\n\n[channel]\nsnr = 10\n";
        match SimConfig::from_toml_str(text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, Some(5));
                assert!(message.contains("snr"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_error_reports_its_line() {
        let text = "[run]\nseed = 3\n\n[placement]\nhdop_tolerance = 2.0\nparents = 45\n";
        match SimConfig::from_toml_str(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, Some(4)),
            other => panic!("{other:?}"),
        }
        let text = "[fusion]\nenabled = true\nweights = { w1 = 0.5, w2 = 0.9 }\n";
        assert!(matches!(SimConfig::from_toml_str(text), Err(Error::Config { line: Some(_), .. })));
        let text = "[run]\nposition = [4.9, 1.0, 1.0]\n";
        assert!(matches!(SimConfig::from_toml_str(text), Err(Error::Config { line: Some(2), .. })));
    }

    #[test]
    fn layouts_by_name_or_coordinates() {
        let cfg = SimConfig::from_toml_str("[scene]\nlayout = \"optimized\"\n").unwrap();
        assert_eq!(cfg.layout().unwrap(), BeaconLayout::optimized());
        let cfg = SimConfig::from_toml_str("[scene]\nlayout = [[0,0,4],[5,0,3],[0,5,2.5],[5,5,4]]\n").unwrap();
        assert_eq!(cfg.layout().unwrap().positions()[1], Point3::from_f64(5.0, 0.0, 3.0));
        assert!(SimConfig::from_toml_str("[scene]\nlayout = \"fancy\"\n").is_err());
        assert!(SimConfig::from_toml_str("[scene]\nlayout = [[0,0,4],[5,0,3],[0,5,2.5],[5,5,9]]\n").is_err());
    }

    #[test]
    fn snr_accepts_inf() {
        let cfg = SimConfig::from_toml_str("[channel]\nsnr_db = \"inf\"\n").unwrap();
        assert_eq!(cfg.channel.snr_db, f64::INFINITY);
        assert!(SimConfig::from_toml_str("[channel]\nsnr_db = \"loud\"\n").is_err());
    }
}
