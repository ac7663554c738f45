//! Evolutionary beacon placement.
//!
//! Individuals are four beacons on a lattice covering the ceiling and the
//! upper half of the walls. Each generation the best `parents` individuals
//! are paired in order, each pair yields one child by coordinate-wise
//! crossover, and the worst individuals are culled back to the population
//! size. The fitness is the domain-averaged VDOP, with a large penalty when
//! the averaged HDOP exceeds its tolerance. The search restarts from a fresh
//! population until the best individual meets both tolerances.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dop::{dop_average, DroneDomain};
use crate::error::{Error, Result};
use crate::geometry::{BeaconLayout, Point3, Room, N_BEACONS};
use crate::linalg::lstsq3;
use crate::seeds::split_path;
use crate::solver::linear_system;

type P3 = Point3<f64>;

/// Added to the fitness of individuals whose averaged HDOP is over tolerance.
pub const HDOP_PENALTY: f64 = 1e6;

const SEED_ATTEMPTS: usize = 10_000;
const CROSSOVER_ATTEMPTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Ceiling,
    Wall,
}

/// Candidate beacon positions: ceiling plane plus walls from half height up.
///
/// Points on a ceiling edge are listed once, as ceiling points.
#[derive(Clone, Debug)]
pub struct BeaconDomain {
    pub room: Room<f64>,
    pub resolution: f64,
    candidates: Vec<P3>,
    surfaces: Vec<Surface>,
}

fn steps(extent: f64, resolution: f64) -> Result<i64> {
    let n = extent / resolution;
    if (n - n.round()).abs() > 1e-6 {
        return Err(Error::invalid(format!("room extent {extent} is not a multiple of the lattice resolution {resolution}")));
    }
    Ok(n.round() as i64)
}

impl BeaconDomain {
    pub fn new(room: Room<f64>, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::invalid("beacon lattice resolution must be positive"));
        }
        let (nx, ny, nz) = (steps(room.dims.x, resolution)?, steps(room.dims.y, resolution)?, steps(room.dims.z, resolution)?);
        let mut keys = BTreeSet::new();
        for ix in 0..=nx {
            for iy in 0..=ny {
                keys.insert((nz, ix, iy));
            }
        }
        // Wall rows from ceil(nz/2) up to, not including, the ceiling.
        for iz in (nz + 1) / 2..nz {
            for ix in 0..=nx {
                keys.insert((iz, ix, 0));
                keys.insert((iz, ix, ny));
            }
            for iy in 0..=ny {
                keys.insert((iz, 0, iy));
                keys.insert((iz, nx, iy));
            }
        }
        let r = resolution;
        let (candidates, surfaces) = keys
            .into_iter()
            .rev()
            .map(|(iz, ix, iy)| {
                let p = P3::new(ix as f64 * r, iy as f64 * r, iz as f64 * r);
                (p, if iz == nz { Surface::Ceiling } else { Surface::Wall })
            })
            .unzip();
        Ok(Self { room, resolution, candidates, surfaces })
    }

    pub fn default_domain() -> Self {
        Self::new(Room::default_room(), 0.25).expect("default beacon domain is valid")
    }

    pub fn candidates(&self) -> &[P3] {
        &self.candidates
    }

    pub fn surface(&self, index: usize) -> Surface {
        self.surfaces[index]
    }

    fn indices_on(&self, surface: Surface) -> Vec<usize> {
        (0..self.candidates.len()).filter(|&i| self.surfaces[i] == surface).collect()
    }

    /// Nearest lattice point; ties go to the earlier candidate.
    pub fn project(&self, p: P3) -> P3 {
        let mut best = (f64::INFINITY, self.candidates[0]);
        for &c in &self.candidates {
            let d = (c - p).norm_sq();
            if d < best.0 {
                best = (d, c);
            }
        }
        best.1
    }

    pub fn contains(&self, p: P3) -> bool {
        self.candidates.iter().any(|&c| (c - p).norm() < 1e-9 * self.resolution)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub beacons: BeaconLayout<f64>,
    /// `vdop_avg`, plus [`HDOP_PENALTY`] if over the HDOP tolerance.
    /// Degenerate layouts carry `+∞` here and in both averages.
    pub fitness: f64,
    pub vdop_avg: f64,
    pub hdop_avg: f64,
}

impl Individual {
    fn degenerate(beacons: BeaconLayout<f64>) -> Self {
        Self { beacons, fitness: f64::INFINITY, vdop_avg: f64::INFINITY, hdop_avg: f64::INFINITY }
    }

    pub fn is_feasible(&self, problem: &PlacementProblem) -> bool {
        self.vdop_avg <= problem.vdop_tolerance && self.hdop_avg <= problem.hdop_tolerance
    }
}

#[derive(Clone, Debug)]
pub struct PlacementProblem {
    pub drone_domain: DroneDomain<f64>,
    pub beacon_domain: BeaconDomain,
    pub hdop_tolerance: f64,
    pub vdop_tolerance: f64,
    pub population: usize,
    pub parents: usize,
    pub offspring: usize,
    pub iterations: usize,
    pub max_restarts: usize,
    pub min_separation: f64,
    /// Per-coordinate Gaussian perturbation probability after crossover; `None` disables it.
    pub mutation_rate: Option<f64>,
    pub rng_seed: u64,
}

impl Default for PlacementProblem {
    fn default() -> Self {
        Self {
            drone_domain: DroneDomain::default_domain(),
            beacon_domain: BeaconDomain::default_domain(),
            hdop_tolerance: 2.0,
            vdop_tolerance: 2.0,
            population: 50,
            parents: 40,
            offspring: 20,
            iterations: 100,
            max_restarts: 10,
            min_separation: 0.5,
            mutation_rate: None,
            rng_seed: 0,
        }
    }
}

impl PlacementProblem {
    pub fn validate(&self) -> Result<()> {
        if self.population < 3 {
            return Err(Error::invalid("population must hold at least 3 individuals"));
        }
        if self.parents > self.population || self.parents < 2 || !self.parents.is_multiple_of(2) {
            return Err(Error::invalid("parents must be even, at least 2, and no more than the population"));
        }
        if self.offspring != self.parents / 2 {
            return Err(Error::invalid("offspring must equal parents / 2"));
        }
        if !(self.hdop_tolerance > 0.0 && self.vdop_tolerance > 0.0) {
            return Err(Error::invalid("DOP tolerances must be positive"));
        }
        if !(self.min_separation >= 0.0) {
            return Err(Error::invalid("minimum separation must be non-negative"));
        }
        if let Some(r) = self.mutation_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid("mutation rate must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    fn separated(&self, beacons: &[P3]) -> bool {
        for i in 0..beacons.len() {
            for j in i + 1..beacons.len() {
                if beacons[i].distance(beacons[j]) < self.min_separation || beacons[i] == beacons[j] {
                    return false;
                }
            }
        }
        true
    }

    /// In-domain and separated.
    pub fn is_valid_layout(&self, layout: &BeaconLayout<f64>) -> bool {
        layout.len() == N_BEACONS
            && layout.positions().iter().all(|&p| self.beacon_domain.contains(p))
            && self.separated(layout.positions())
    }
}

/// Whether the linearized trilateration system has full column rank.
fn solvable(layout: &BeaconLayout<f64>) -> bool {
    let zeros = [0.0; N_BEACONS];
    linear_system(layout.positions(), &zeros).and_then(|(a, b)| lstsq3(&a, &b)).is_ok()
}

/// Fitness of a layout; `+∞` for coplanar layouts and degenerate domains.
pub fn fitness(layout: &BeaconLayout<f64>, problem: &PlacementProblem) -> Individual {
    let mut ind = Individual::degenerate(layout.clone());
    if !solvable(layout) {
        return ind;
    }
    if let Ok(avg) = dop_average(layout.positions(), &problem.drone_domain) {
        ind.vdop_avg = avg.vdop_avg;
        ind.hdop_avg = avg.hdop_avg;
        ind.fitness = avg.vdop_avg + if avg.hdop_avg > problem.hdop_tolerance { HDOP_PENALTY } else { 0.0 };
    }
    ind
}

fn draw_layout<R: Rng>(problem: &PlacementProblem, pools: [&[usize]; N_BEACONS], rng: &mut R) -> Result<BeaconLayout<f64>> {
    let cands = problem.beacon_domain.candidates();
    for _ in 0..SEED_ATTEMPTS {
        let pts: Vec<P3> = pools.iter().map(|pool| cands[pool[rng.random_range(0..pool.len())]]).collect();
        if problem.separated(&pts) {
            return BeaconLayout::new(pts);
        }
    }
    Err(Error::InfeasibleDomain(format!(
        "could not place {N_BEACONS} beacons {} m apart after {SEED_ATTEMPTS} draws",
        problem.min_separation
    )))
}

/// Initial population split into all-ceiling, all-wall and mixed groups.
///
/// Group sizes are `⌈P/3⌉`, `⌈(P−1)/3⌉` and `⌊P/3⌋`. Mixed individuals have
/// at least one beacon on each surface.
pub fn seed_population(problem: &PlacementProblem, restart: usize) -> Result<Vec<Individual>> {
    problem.validate()?;
    let d = &problem.beacon_domain;
    let (ceiling, wall) = (d.indices_on(Surface::Ceiling), d.indices_on(Surface::Wall));
    let all: Vec<usize> = (0..d.candidates().len()).collect();
    if ceiling.is_empty() || wall.is_empty() {
        return Err(Error::InfeasibleDomain("beacon domain needs both ceiling and wall points".into()));
    }
    let p = problem.population;
    let quotas = [p.div_ceil(3), (p + 1) / 3, p / 3];
    let mut layouts = Vec::with_capacity(p);
    let mut index = 0u64;
    for (group, &quota) in quotas.iter().enumerate() {
        for _ in 0..quota {
            let mut rng = ChaCha8Rng::seed_from_u64(split_path(problem.rng_seed, &[restart as u64, 0, index]));
            let pools: [&[usize]; N_BEACONS] = match group {
                0 => [&ceiling, &ceiling, &ceiling, &ceiling],
                1 => [&wall, &wall, &wall, &wall],
                _ => [&ceiling, &wall, &all, &all],
            };
            layouts.push(draw_layout(problem, pools, &mut rng)?);
            index += 1;
        }
    }
    Ok(evaluate(layouts, problem))
}

fn evaluate(layouts: Vec<BeaconLayout<f64>>, problem: &PlacementProblem) -> Vec<Individual> {
    layouts.par_iter().map(|l| fitness(l, problem)).collect()
}

/// Child layout: each coordinate of beacon k from either parent's beacon k,
/// then snapped to the lattice. Falls back to `parent_a` after 20 failed draws.
pub fn crossover<R: Rng>(parent_a: &BeaconLayout<f64>, parent_b: &BeaconLayout<f64>, problem: &PlacementProblem, rng: &mut R) -> BeaconLayout<f64> {
    let mutation = problem.mutation_rate.filter(|&r| r > 0.0);
    let jitter = Normal::new(0.0, 0.5).expect("valid normal");
    for _ in 0..CROSSOVER_ATTEMPTS {
        let pts: Vec<P3> = parent_a
            .positions()
            .iter()
            .zip(parent_b.positions())
            .map(|(a, b)| {
                let (a, b) = (a.to_array(), b.to_array());
                let mut c = [0.0; 3];
                for k in 0..3 {
                    c[k] = if rng.random::<bool>() { a[k] } else { b[k] };
                    if let Some(rate) = mutation {
                        if rng.random::<f64>() < rate {
                            c[k] += jitter.sample(rng);
                        }
                    }
                }
                problem.beacon_domain.project(P3::from_array(c))
            })
            .collect();
        if problem.separated(&pts) {
            if let Ok(layout) = BeaconLayout::new(pts) {
                return layout;
            }
        }
    }
    parent_a.clone()
}

fn sort_by_fitness(pop: &mut [Individual]) {
    // Stable: equal fitness keeps insertion order.
    pop.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

/// One generation: breed from the sorted population and cull back to size.
pub fn evolve_generation(mut population: Vec<Individual>, problem: &PlacementProblem, restart: usize, iteration: usize) -> Vec<Individual> {
    sort_by_fitness(&mut population);
    let children: Vec<BeaconLayout<f64>> = (0..problem.offspring)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_path(problem.rng_seed, &[restart as u64, 1 + iteration as u64, k as u64]));
            crossover(&population[2 * k].beacons, &population[2 * k + 1].beacons, problem, &mut rng)
        })
        .collect();
    population.extend(evaluate(children, problem));
    sort_by_fitness(&mut population);
    population.truncate(problem.population);
    population
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub restart: usize,
    pub iteration: usize,
    pub best_fitness: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlacementResult {
    pub layout: BeaconLayout<f64>,
    pub vdop_avg: f64,
    pub hdop_avg: f64,
    pub fitness: f64,
    pub feasible: bool,
    /// Restarts performed after the first run.
    pub restarts: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub history: Vec<HistoryRow>,
}

pub fn optimize(problem: &PlacementProblem) -> Result<PlacementResult> {
    problem.validate()?;
    let mut history = Vec::new();
    let mut best: Option<Individual> = None;
    let mut iterations = 0;
    for restart in 0..=problem.max_restarts {
        let mut pop = seed_population(problem, restart)?;
        sort_by_fitness(&mut pop);
        for it in 0..problem.iterations {
            pop = evolve_generation(pop, problem, restart, it);
            iterations += 1;
            history.push(HistoryRow { restart, iteration: it, best_fitness: pop[0].fitness });
        }
        let top = pop.swap_remove(0);
        let feasible = top.is_feasible(problem);
        if best.as_ref().is_none_or(|b| top.fitness < b.fitness) {
            best = Some(top);
        }
        if feasible {
            let b = best.expect("set above");
            // A later restart's top can only replace `best` by being better, and
            // a feasible individual never carries the penalty, so `b` is feasible.
            return Ok(PlacementResult {
                feasible: b.is_feasible(problem),
                layout: b.beacons,
                vdop_avg: b.vdop_avg,
                hdop_avg: b.hdop_avg,
                fitness: b.fitness,
                restarts: restart,
                iterations,
                history,
            });
        }
    }
    let b = best.expect("at least one run");
    Ok(PlacementResult {
        feasible: false,
        layout: b.beacons,
        vdop_avg: b.vdop_avg,
        hdop_avg: b.hdop_avg,
        fitness: b.fitness,
        restarts: problem.max_restarts,
        iterations,
        history,
    })
}
