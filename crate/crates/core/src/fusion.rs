//! Ceiling-facing altimeter and the z-axis blend.
//!
//! A rangefinder pointed at the ceiling measures the echo round trip `t`;
//! the drone's height is `H − c·t/2`. That value is blended with the
//! trilateration `z` as `w1·z + w2·h`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightMeasurement<F> {
    pub round_trip_time: F,
    pub ceiling_height: F,
    /// Clamped to `[0, ceiling_height]`.
    pub derived_height: F,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights<F>")]
#[serde(bound(deserialize = "F: Real + Deserialize<'de>"))]
pub struct FusionWeights<F> {
    w1: F,
    w2: F,
}

#[derive(Deserialize)]
struct RawWeights<F> {
    w1: F,
    w2: F,
}

impl<F: Real> TryFrom<RawWeights<F>> for FusionWeights<F> {
    type Error = Error;
    fn try_from(r: RawWeights<F>) -> Result<Self> {
        Self::new(r.w1, r.w2)
    }
}

impl<F: Real> FusionWeights<F> {
    /// Weights must lie in `[0, 1]` and sum to one within `1e-9`.
    pub fn new(w1: F, w2: F) -> Result<Self> {
        let unit = |w: F| w >= F::zero() && w <= F::one();
        if !unit(w1) || !unit(w2) || (w1 + w2 - F::one()).abs() > F::lit(1e-9).max(F::epsilon() * F::lit(4.0)) {
            return Err(Error::invalid(format!("fusion weights must be in [0,1] and sum to 1, got {w1} and {w2}")));
        }
        Ok(Self { w1, w2 })
    }

    /// Inverse-variance weights: `w1 ∝ 1/var_z`, `w2 ∝ 1/var_h`.
    pub fn inverse_variance(var_z: F, var_h: F) -> Result<Self> {
        if !(var_z > F::zero() && var_h > F::zero()) || !var_z.is_finite() || !var_h.is_finite() {
            return Err(Error::invalid("variances must be positive and finite"));
        }
        let w1 = var_h / (var_z + var_h);
        Ok(Self { w1, w2: F::one() - w1 })
    }

    pub fn w1(&self) -> F {
        self.w1
    }

    pub fn w2(&self) -> F {
        self.w2
    }
}

impl<F: Real> Default for FusionWeights<F> {
    fn default() -> Self {
        Self { w1: F::lit(0.2), w2: F::lit(0.8) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(deserialize = "F: Real + Deserialize<'de>"))]
pub struct FusionConfig<F> {
    pub enabled: bool,
    pub weights: FusionWeights<F>,
    /// Echo timing jitter (s).
    pub noise_std: F,
    /// Blend by inverse variance using `range_sigma` for the trilateration z.
    pub auto_weight: bool,
    /// Assumed z standard deviation of the trilateration fix (m), used by `auto_weight`.
    pub range_sigma: F,
    /// Chance that something between drone and ceiling returns an early echo.
    pub obstruction_probability: F,
}

impl<F: Real> Default for FusionConfig<F> {
    fn default() -> Self {
        Self {
            enabled: true,
            weights: FusionWeights::default(),
            noise_std: F::lit(10e-6),
            auto_weight: false,
            range_sigma: F::lit(2e-3),
            obstruction_probability: F::zero(),
        }
    }
}

impl<F: Real> FusionConfig<F> {
    pub fn validate(&self) -> Result<()> {
        FusionWeights::new(self.weights.w1, self.weights.w2)?;
        if !(self.noise_std >= F::zero()) || !self.noise_std.is_finite() {
            return Err(Error::invalid("fusion noise_std must be finite and non-negative"));
        }
        if !(self.range_sigma > F::zero()) {
            return Err(Error::invalid("fusion range_sigma must be positive"));
        }
        if !(self.obstruction_probability >= F::zero() && self.obstruction_probability <= F::one()) {
            return Err(Error::invalid("obstruction_probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Weights actually applied, given the speed of sound for the echo variance.
    pub fn effective_weights(&self, speed_of_sound: F) -> Result<FusionWeights<F>> {
        if !self.auto_weight {
            return Ok(self.weights);
        }
        let sh = speed_of_sound * self.noise_std / F::lit(2.0);
        // A noiseless echo gets all the weight.
        if sh == F::zero() {
            return FusionWeights::new(F::zero(), F::one());
        }
        FusionWeights::inverse_variance(self.range_sigma * self.range_sigma, sh * sh)
    }
}

/// Height from a round-trip time.
pub fn height_from_echo<F: Real>(round_trip_time: F, ceiling_height: F, speed_of_sound: F) -> HeightMeasurement<F> {
    let h = ceiling_height - speed_of_sound * round_trip_time / F::lit(2.0);
    HeightMeasurement {
        round_trip_time,
        ceiling_height,
        derived_height: h.max(F::zero()).min(ceiling_height),
    }
}

/// Echo off the ceiling with Gaussian timing jitter.
pub fn simulate_ceiling_echo<F: Real, R: Rng + ?Sized>(
    true_height: F,
    ceiling_height: F,
    speed_of_sound: F,
    noise_std: F,
    rng: &mut R,
) -> Result<HeightMeasurement<F>> {
    simulate_ceiling_echo_with_obstruction(true_height, ceiling_height, speed_of_sound, noise_std, F::zero(), rng)
}

/// As [`simulate_ceiling_echo`], but with probability `obstruction_probability`
/// the echo comes from a uniformly placed object between drone and ceiling.
pub fn simulate_ceiling_echo_with_obstruction<F: Real, R: Rng + ?Sized>(
    true_height: F,
    ceiling_height: F,
    speed_of_sound: F,
    noise_std: F,
    obstruction_probability: F,
    rng: &mut R,
) -> Result<HeightMeasurement<F>> {
    if !(true_height > F::zero() && true_height < ceiling_height) {
        return Err(Error::invalid(format!("height {true_height} must lie strictly between 0 and {ceiling_height}")));
    }
    if !(speed_of_sound > F::zero()) {
        return Err(Error::invalid("speed of sound must be positive"));
    }
    let mut gap = ceiling_height - true_height;
    if obstruction_probability > F::zero() && rng.random::<f64>() < obstruction_probability.to_f64_lossy() {
        gap *= F::lit(rng.random::<f64>());
    }
    let jitter = if noise_std > F::zero() { noise_std * F::std_normal(rng) } else { F::zero() };
    let t = F::lit(2.0) * gap / speed_of_sound + jitter;
    Ok(height_from_echo(t, ceiling_height, speed_of_sound))
}

pub fn fuse_height<F: Real>(z_stage1: F, h_drone: F, weights: &FusionWeights<F>) -> F {
    weights.w1 * z_stage1 + weights.w2 * h_drone
}
