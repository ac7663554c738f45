//! Ultrasonic indoor localization for small drones.
//!
//! Four fixed beacons transmit Walsh-coded, frequency-hopped BPSK bursts. The
//! receiver correlates against each beacon's reference, converts the peak lag
//! to a range and trilaterates. Beacon placement is tuned with a small
//! evolutionary search over the room's walls and ceiling, and the vertical
//! axis can be refined with an upward echo off the ceiling.
//!
//! Signal-processing and geometry code is generic over [`Real`] (`f32` or
//! `f64`); the aliases below fix the common `f64` instantiation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod channel;
pub mod dop;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod placement;
pub mod ranging;
pub mod scalar;
pub mod seeds;
pub mod solver;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = geometry::Point3<f64>;
pub type Room = geometry::Room<f64>;
pub type BeaconLayout = geometry::BeaconLayout<f64>;
pub type HopPlan = waveform::HopPlan<f64>;
pub type WaveformConfig = waveform::WaveformConfig<f64>;
pub type SampledSignal = waveform::SampledSignal<f64>;
pub type ChannelModel = channel::ChannelModel<f64>;
pub type Scene = channel::Scene<f64>;
pub type RangeEstimate = ranging::RangeEstimate<f64>;
pub type PositionFix = solver::PositionFix<f64>;
pub type DopReport = dop::DopReport<f64>;
pub type DroneDomain = dop::DroneDomain<f64>;
pub type FusionConfig = fusion::FusionConfig<f64>;

pub type Point32 = geometry::Point3<f32>;
pub type SampledSignal32 = waveform::SampledSignal<f32>;
pub type PositionFix32 = solver::PositionFix<f32>;
