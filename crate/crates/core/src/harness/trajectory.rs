use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dop::DroneDomain;
use crate::error::{Error, Result};
use crate::geometry::Point3;

type P3 = Point3<f64>;

/// Piecewise-linear flight path sampled every `fix_spacing` meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<P3>,
    pub fix_spacing: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<P3>, fix_spacing: f64, domain: &DroneDomain<f64>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::Config { line: None, message: "trajectory needs at least one waypoint".into() });
        }
        if !(fix_spacing > 0.0) {
            return Err(Error::Config { line: None, message: "fix spacing must be positive".into() });
        }
        if let Some(p) = waypoints.iter().find(|&&p| !domain.contains(p)) {
            return Err(Error::Config { line: None, message: format!("waypoint {p:?} lies outside the drone domain") });
        }
        Ok(Self { waypoints, fix_spacing })
    }

    /// Uniform random waypoints inside the domain's bounding box.
    pub fn random(domain: &DroneDomain<f64>, n_waypoints: usize, fix_spacing: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waypoints = (0..n_waypoints).map(|_| uniform_in(domain, &mut rng)).collect();
        Self::new(waypoints, fix_spacing, domain)
    }

    pub fn line(from: P3, to: P3, fix_spacing: f64, domain: &DroneDomain<f64>) -> Result<Self> {
        Self::new(vec![from, to], fix_spacing, domain)
    }

    /// Points every `fix_spacing` along the path, continuing across corners,
    /// ending with the final waypoint.
    pub fn fixes(&self) -> Vec<P3> {
        let mut out = vec![self.waypoints[0]];
        // Distance still to travel before the next fix.
        let mut carry = self.fix_spacing;
        for seg in self.waypoints.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = a.distance(b);
            let mut s = carry;
            while s <= len + 1e-12 {
                out.push(a + (b - a) * (s / len));
                s += self.fix_spacing;
            }
            carry = s - len;
        }
        let last = *self.waypoints.last().expect("non-empty");
        if out.last().is_none_or(|p| p.distance(last) > 1e-9) {
            out.push(last);
        }
        out
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

pub(crate) fn uniform_in<R: Rng>(domain: &DroneDomain<f64>, rng: &mut R) -> P3 {
    let mut axis = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    P3::new(axis(domain.min.x, domain.max.x), axis(domain.min.y, domain.max.y), axis(domain.min.z, domain.max.z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> DroneDomain<f64> {
        DroneDomain::default_domain()
    }

    #[test]
    fn straight_line_fixes_are_evenly_spaced() {
        let t = Trajectory::line(P3::from_f64(1.0, 2.5, 1.5), P3::from_f64(4.0, 2.5, 1.5), 0.25, &domain()).unwrap();
        let f = t.fixes();
        assert_eq!(f.len(), 13);
        for w in f.windows(2) {
            assert!((w[0].distance(w[1]) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn spacing_is_measured_along_the_path() {
        let pts = vec![P3::from_f64(1.0, 1.0, 1.0), P3::from_f64(1.1, 1.0, 1.0), P3::from_f64(1.1, 2.0, 1.0)];
        let t = Trajectory::new(pts, 0.25, &domain()).unwrap();
        let f = t.fixes();
        assert!((f[1].y - 1.15).abs() < 1e-12);
        assert_eq!(*f.last().unwrap(), P3::from_f64(1.1, 2.0, 1.0));
    }

    #[test]
    fn single_waypoint_gives_one_fix() {
        let t = Trajectory::new(vec![P3::from_f64(2.0, 2.0, 1.0)], 0.25, &domain()).unwrap();
        assert_eq!(t.fixes(), vec![P3::from_f64(2.0, 2.0, 1.0)]);
    }

    #[test]
    fn random_paths_stay_in_domain_and_repeat_by_seed() {
        let d = domain();
        let a = Trajectory::random(&d, 6, 0.25, 9).unwrap();
        assert_eq!(a, Trajectory::random(&d, 6, 0.25, 9).unwrap());
        assert!(a.fixes().iter().all(|&p| d.contains(p)));
        assert!(Trajectory::new(vec![P3::from_f64(0.1, 2.0, 1.0)], 0.25, &d).is_err());
    }
}
