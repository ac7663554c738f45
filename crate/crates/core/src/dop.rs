//! Dilution of precision.
//!
//! With range errors of equal variance σ_r² and no clock offset, the position
//! covariance is `σ_r² · Q` where `Q = (UᵀU)⁻¹` and `U` stacks the unit
//! vectors from the receiver to each beacon. HDOP, VDOP and GDOP are square
//! roots of sums of `Q`'s diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Room};
use crate::linalg::{gram3, inverse3, norm1, Mat3};
use crate::scalar::Real;

/// Condition number of UᵀU above which geometry is declared degenerate.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

/// Qualitative rating of a GDOP value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GdopClass {
    MeasurementErrorOrRedundancy,
    Ideal,
    VeryGood,
    Good,
    Medium,
    Sufficient,
    Bad,
}

impl GdopClass {
    /// `<1`, `=1`, `(1,2)`, `[2,5)`, `[5,10)`, `[10,20)`, `≥20`.
    pub fn from_gdop(gdop: f64) -> Self {
        if gdop < 1.0 {
            GdopClass::MeasurementErrorOrRedundancy
        } else if gdop == 1.0 {
            GdopClass::Ideal
        } else if gdop < 2.0 {
            GdopClass::VeryGood
        } else if gdop < 5.0 {
            GdopClass::Good
        } else if gdop < 10.0 {
            GdopClass::Medium
        } else if gdop < 20.0 {
            GdopClass::Sufficient
        } else {
            GdopClass::Bad
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DopReport<F> {
    pub hdop: F,
    pub vdop: F,
    pub gdop: F,
    pub classification: GdopClass,
}

/// Unit line-of-sight vectors, one row per beacon.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryMatrix<F> {
    pub rows: Vec<[F; 3]>,
}

pub fn geometry_matrix<F: Real>(beacons: &[Point3<F>], target: Point3<F>) -> Result<GeometryMatrix<F>> {
    let rows = beacons
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let d = b - target;
            let r = d.norm();
            if !(r > F::epsilon() * (F::one() + target.norm())) {
                return Err(Error::invalid(format!("target coincides with beacon {i}")));
            }
            Ok([d.x / r, d.y / r, d.z / r])
        })
        .collect::<Result<_>>()?;
    Ok(GeometryMatrix { rows })
}

/// `Q = (UᵀU)⁻¹`, rejecting condition numbers above `condition_cap`.
pub fn covariance_with_cap<F: Real>(beacons: &[Point3<F>], target: Point3<F>, condition_cap: f64) -> Result<Mat3<F>> {
    if beacons.len() < 3 {
        return Err(Error::invalid("DOP needs at least 3 beacons"));
    }
    let u = geometry_matrix(beacons, target)?;
    let g = gram3(&u.rows);
    let q = inverse3(&g).ok_or(Error::DegenerateGeometry { condition: f64::INFINITY })?;
    let condition = (norm1(&g) * norm1(&q)).to_f64_lossy();
    if !(condition <= condition_cap) {
        return Err(Error::DegenerateGeometry { condition });
    }
    Ok(q)
}

pub fn covariance<F: Real>(beacons: &[Point3<F>], target: Point3<F>) -> Result<Mat3<F>> {
    covariance_with_cap(beacons, target, DEFAULT_CONDITION_CAP)
}

pub fn dop_from_covariance<F: Real>(q: &Mat3<F>) -> DopReport<F> {
    let h2 = q[0][0] + q[1][1];
    let v2 = q[2][2];
    let gdop = (h2 + v2).sqrt();
    DopReport {
        hdop: h2.sqrt(),
        vdop: v2.sqrt(),
        gdop,
        classification: GdopClass::from_gdop(gdop.to_f64_lossy()),
    }
}

pub fn dop_at<F: Real>(beacons: &[Point3<F>], target: Point3<F>) -> Result<DopReport<F>> {
    covariance(beacons, target).map(|q| dop_from_covariance(&q))
}

/// Regular lattice of admissible drone positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneDomain<F> {
    pub min: Point3<F>,
    pub max: Point3<F>,
    pub resolution: F,
    pub points: Vec<Point3<F>>,
}

fn axis<F: Real>(lo: F, hi: F, step: F) -> Vec<F> {
    let n = ((hi - lo) / step + F::lit(1e-9)).floor().to_f64_lossy() as usize;
    (0..=n).map(|k| lo + step * F::lit(k as f64)).collect()
}

impl<F: Real> DroneDomain<F> {
    pub fn new(room: &Room<F>, min: Point3<F>, max: Point3<F>, resolution: F) -> Result<Self> {
        if !(resolution > F::zero()) {
            return Err(Error::invalid("domain resolution must be positive"));
        }
        if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
            return Err(Error::invalid("domain minimum exceeds maximum"));
        }
        if !room.contains_strictly(min) || !room.contains_strictly(max) {
            return Err(Error::invalid("drone domain must lie strictly inside the room"));
        }
        let mut points = Vec::new();
        for &x in &axis(min.x, max.x, resolution) {
            for &y in &axis(min.y, max.y, resolution) {
                for &z in &axis(min.z, max.z, resolution) {
                    points.push(Point3::new(x, y, z));
                }
            }
        }
        Ok(Self { min, max, resolution, points })
    }

    /// `x, y ∈ [0.5, 4.5]`, `z ∈ [0.5, 3.0]`, 0.5 m grid in the default room.
    pub fn default_domain() -> Self {
        Self::new(
            &Room::default_room(),
            Point3::from_f64(0.5, 0.5, 0.5),
            Point3::from_f64(4.5, 4.5, 3.0),
            F::lit(0.5),
        )
        .expect("default domain is valid")
    }

    /// A domain holding a single point.
    pub fn single(room: &Room<F>, p: Point3<F>) -> Result<Self> {
        Self::new(room, p, p, F::one())
    }

    pub fn contains(&self, p: Point3<F>) -> bool {
        p.x >= self.min.x && p.y >= self.min.y && p.z >= self.min.z && p.x <= self.max.x && p.y <= self.max.y && p.z <= self.max.z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DopAverage<F> {
    pub hdop_avg: F,
    pub vdop_avg: F,
    /// Domain points excluded for degenerate geometry.
    pub degenerate: usize,
}

/// Mean HDOP and VDOP over the domain lattice.
///
/// Degenerate points are skipped while they make up at most 1% of the lattice.
pub fn dop_average<F: Real>(beacons: &[Point3<F>], domain: &DroneDomain<F>) -> Result<DopAverage<F>> {
    let reports: Vec<Option<DopReport<F>>> = domain.points.par_iter().map(|&p| dop_at(beacons, p).ok()).collect();
    let total = reports.len();
    let degenerate = reports.iter().filter(|r| r.is_none()).count();
    if total == 0 || degenerate == total || degenerate * 100 > total {
        return Err(Error::DomainDegeneracy { degenerate, total });
    }
    let (mut h, mut v) = (F::zero(), F::zero());
    for r in reports.iter().flatten() {
        h += r.hdop;
        v += r.vdop;
    }
    let n = F::lit((total - degenerate) as f64);
    Ok(DopAverage { hdop_avg: h / n, vdop_avg: v / n, degenerate })
}

/// 2-D Cramér–Rao bound `σ_r · √(N / Σ_{i<j} |sin(θᵢ − θⱼ)|)`.
pub fn crb_2d<F: Real>(beacon_angles: &[F], sigma_r: F) -> Result<F> {
    let n = beacon_angles.len();
    if n < 3 {
        return Err(Error::invalid(format!("CRB needs at least 3 beacons, got {n}")));
    }
    let mut sum = F::zero();
    for i in 0..n {
        for j in i + 1..n {
            sum += (beacon_angles[i] - beacon_angles[j]).sin().abs();
        }
    }
    if !(sum > F::epsilon() * F::lit((n * n) as f64)) {
        return Err(Error::DegenerateGeometry { condition: f64::INFINITY });
    }
    Ok(sigma_r * (F::lit(n as f64) / sum).sqrt())
}
