//! Linearized least-squares trilateration.
//!
//! Subtracting the last beacon's sphere equation from every other one removes
//! the quadratic terms and leaves `A x = b` with rows
//! `A_i = 2 (p_n − p_i)` and `b_i = d_i² − d_n² − ‖p_i‖² + ‖p_n‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::linalg::lstsq3;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionFix<F> {
    pub position: Point3<F>,
    /// `‖A x − b‖` of the linearized system (m²).
    pub residual_norm: F,
}

/// Design matrix and right-hand side, reference beacon last.
pub fn linear_system<F: Real>(beacons: &[Point3<F>], ranges: &[F]) -> Result<(Vec<[F; 3]>, Vec<F>)> {
    if beacons.len() < 4 {
        return Err(Error::invalid(format!("trilateration needs at least 4 beacons, got {}", beacons.len())));
    }
    if ranges.len() != beacons.len() {
        return Err(Error::invalid(format!("{} ranges for {} beacons", ranges.len(), beacons.len())));
    }
    if ranges.iter().any(|r| !r.is_finite() || *r < F::zero()) {
        return Err(Error::invalid("ranges must be finite and non-negative"));
    }
    let n = beacons.len() - 1;
    let (pn, dn) = (beacons[n], ranges[n]);
    let two = F::lit(2.0);
    let rows = beacons[..n]
        .iter()
        .map(|&p| {
            let d = pn - p;
            [two * d.x, two * d.y, two * d.z]
        })
        .collect();
    let rhs = beacons[..n]
        .iter()
        .zip(ranges)
        .map(|(&p, &d)| d * d - dn * dn - p.norm_sq() + pn.norm_sq())
        .collect();
    Ok((rows, rhs))
}

/// Position from ranges to four or more beacons.
pub fn trilaterate<F: Real>(beacons: &[Point3<F>], ranges: &[F]) -> Result<PositionFix<F>> {
    let (a, b) = linear_system(beacons, ranges)?;
    let (x, residual_norm) = lstsq3(&a, &b)?;
    let position = Point3::from_array(x);
    if !position.is_finite() {
        return Err(Error::SingularGeometry("non-finite solution".into()));
    }
    Ok(PositionFix { position, residual_norm })
}
