//! Points, rooms and beacon layouts.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of transmitter beacons in a layout.
pub const N_BEACONS: usize = 4;

/// A point or displacement in room coordinates (meters).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3<F> {
    pub x: F,
    pub y: F,
    pub z: F,
}

impl<F: Real> Point3<F> {
    pub fn new(x: F, y: F, z: F) -> Self {
        Self { x, y, z }
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(F::lit(x), F::lit(y), F::lit(z))
    }

    pub fn to_array(self) -> [F; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [F; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn dot(self, other: Self) -> F {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    pub fn norm(self) -> F {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, other: Self) -> F {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about the z axis by `angle` radians.
    pub fn rotate_z(self, angle: F) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn cast<G: Real>(self) -> Point3<G> {
        Point3::new(
            G::lit(self.x.to_f64_lossy()),
            G::lit(self.y.to_f64_lossy()),
            G::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<F: Real> Add for Point3<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<F: Real> Sub for Point3<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<F: Real> Mul<F> for Point3<F> {
    type Output = Self;
    fn mul(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<F: Real> Neg for Point3<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned room `[0, dims.x] × [0, dims.y] × [0, dims.z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room<F> {
    pub dims: Point3<F>,
}

impl<F: Real> Room<F> {
    pub fn new(dims: Point3<F>) -> Result<Self> {
        if !(dims.x > F::zero() && dims.y > F::zero() && dims.z > F::zero()) || !dims.is_finite() {
            return Err(Error::invalid(format!("room dimensions must be positive, got {dims:?}")));
        }
        Ok(Self { dims })
    }

    /// The 5 m × 5 m × 4 m room used by the default experiments.
    pub fn default_room() -> Self {
        Self { dims: Point3::from_f64(5.0, 5.0, 4.0) }
    }

    pub fn height(&self) -> F {
        self.dims.z
    }

    /// Closed-box membership (walls and ceiling included).
    pub fn contains(&self, p: Point3<F>) -> bool {
        let z = F::zero();
        p.x >= z && p.y >= z && p.z >= z && p.x <= self.dims.x && p.y <= self.dims.y && p.z <= self.dims.z
    }

    /// Strict interior membership.
    pub fn contains_strictly(&self, p: Point3<F>) -> bool {
        let z = F::zero();
        p.x > z && p.y > z && p.z > z && p.x < self.dims.x && p.y < self.dims.y && p.z < self.dims.z
    }

    pub fn diagonal(&self) -> F {
        self.dims.norm()
    }
}

/// Positions of the four transmitter beacons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point3<F>>", into = "Vec<Point3<F>>")]
#[serde(bound(serialize = "F: Real + Serialize", deserialize = "F: Real + Deserialize<'de>"))]
pub struct BeaconLayout<F> {
    positions: Vec<Point3<F>>,
}

impl<F: Real> BeaconLayout<F> {
    pub fn new(positions: Vec<Point3<F>>) -> Result<Self> {
        if positions.len() != N_BEACONS {
            return Err(Error::invalid(format!(
                "a beacon layout has exactly {N_BEACONS} beacons, got {}",
                positions.len()
            )));
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite beacon position {p:?}")));
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if positions[i] == positions[j] {
                    return Err(Error::invalid(format!("beacons {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { positions })
    }

    /// Layout used by the preliminary experiments.
    pub fn original() -> Self {
        Self::from_coords([[2.5, 0.0, 1.5], [5.0, 2.5, 2.5], [2.5, 5.0, 2.0], [0.0, 5.0, 3.0]])
    }

    /// Layout produced by the evolutionary placement search.
    pub fn optimized() -> Self {
        Self::from_coords([[4.5, 0.0, 2.5], [5.0, 4.0, 3.5], [1.0, 5.0, 2.0], [1.5, 2.0, 4.0]])
    }

    pub fn from_coords(coords: [[f64; 3]; N_BEACONS]) -> Self {
        Self {
            positions: coords.iter().map(|c| Point3::from_f64(c[0], c[1], c[2])).collect(),
        }
    }

    pub fn positions(&self) -> &[Point3<F>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_separation(&self) -> F {
        let mut best = F::infinity();
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                best = best.min(self.positions[i].distance(self.positions[j]));
            }
        }
        best
    }

    pub fn translated(&self, v: Point3<F>) -> Self {
        Self { positions: self.positions.iter().map(|&p| p + v).collect() }
    }
}

impl<F: Real> TryFrom<Vec<Point3<F>>> for BeaconLayout<F> {
    type Error = Error;
    fn try_from(v: Vec<Point3<F>>) -> Result<Self> {
        Self::new(v)
    }
}

impl<F> From<BeaconLayout<F>> for Vec<Point3<F>> {
    fn from(l: BeaconLayout<F>) -> Self {
        l.positions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_rejects_wrong_count_and_duplicates() {
        let p = Point3::<f64>::from_f64(1.0, 1.0, 1.0);
        assert!(BeaconLayout::new(vec![p; 3]).is_err());
        let q = Point3::from_f64(2.0, 1.0, 1.0);
        let r = Point3::from_f64(3.0, 1.0, 1.0);
        assert!(BeaconLayout::new(vec![p, q, r, p]).is_err());
        assert!(BeaconLayout::new(vec![p, q, r, Point3::from_f64(0.0, 0.0, 4.0)]).is_ok());
    }

    #[test]
    fn builtin_layouts_are_inside_default_room() {
        let room = Room::<f64>::default_room();
        for l in [BeaconLayout::<f64>::original(), BeaconLayout::optimized()] {
            assert!(l.positions().iter().all(|&p| room.contains(p)));
            assert!(l.min_separation() > 1.0);
        }
    }

    #[test]
    fn layout_serde_enforces_invariants() {
        let o = Point3::<f64>::default();
        let dup = vec![o, o, Point3::from_f64(1.0, 1.0, 1.0), Point3::from_f64(2.0, 2.0, 2.0)];
        let json = serde_json::to_string(&dup).unwrap();
        assert!(serde_json::from_str::<BeaconLayout<f64>>(&json).is_err());
        let ok = serde_json::to_string(&BeaconLayout::<f64>::original()).unwrap();
        let back: BeaconLayout<f64> = serde_json::from_str(&ok).unwrap();
        assert_eq!(back, BeaconLayout::original());
    }

    #[test]
    fn rotation_preserves_norm() {
        let p = Point3::<f64>::from_f64(1.0, 2.0, 3.0);
        let r = p.rotate_z(0.7);
        assert!((r.norm() - p.norm()).abs() < 1e-12);
        assert_eq!(r.z, 3.0);
    }
}
