//! Particle ensembles: initial sampling, parallel transport, ordering and
//! equivariance checks, and the superarrival parameters `β_i`, `β̃`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use std::fmt;
use std::str::FromStr;

use super::fields::VelocityField;
use super::trajectory::{integrate_trajectory, Direction, PathStatus, Trajectory};
use crate::error::{Error, Result};
use crate::observables::SuperarrivalWindow;
use crate::state::{cumulative_integral, interpolate, GaussianPacketSpec, Grid};

/// Smallest separation two ordered particles may reach.
pub const CROSSING_TOLERANCE: f64 = 1e-12;

/// Redraws allowed per random sample before it is dropped.
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingScheme {
    /// `x0 + σ·Φ⁻¹((i − ½)/N)`, deterministic.
    Quantile,
    /// Seeded i.i.d. normal draws.
    Random,
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingScheme::Quantile => "quantile",
            SamplingScheme::Random => "random",
        })
    }
}

impl FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quantile" => Ok(SamplingScheme::Quantile),
            "random" => Ok(SamplingScheme::Random),
            other => Err(Error::config(
                "sampling",
                format!("unknown sampling scheme `{other}` (quantile|random)"),
            )),
        }
    }
}

/// Initial positions distributed as the packet density. Samples outside the
/// grid interior are redrawn (random) or dropped (quantile).
pub fn sample_initial_positions(
    spec: &GaussianPacketSpec,
    n: usize,
    scheme: SamplingScheme,
    seed: u64,
    grid: &Grid,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::argument("particle count must be at least 1"));
    }
    if !(spec.sigma > 0.0) {
        return Err(Error::config("sigma", "must be positive"));
    }
    let positions: Vec<f64> = match scheme {
        SamplingScheme::Quantile => {
            let unit = StdNormal::new(0.0, 1.0).expect("unit normal");
            (1..=n)
                .map(|i| spec.x0 + spec.sigma * unit.inverse_cdf((i as f64 - 0.5) / n as f64))
                .filter(|&x| grid.strictly_inside(x))
                .collect()
        }
        SamplingScheme::Random => {
            let dist = Normal::new(spec.x0, spec.sigma)
                .map_err(|e| Error::config("sigma", e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                if let Some(x) = (0..MAX_REDRAWS)
                    .map(|_| dist.sample(&mut rng))
                    .find(|&x| grid.strictly_inside(x))
                {
                    out.push(x);
                }
            }
            out
        }
    };
    if positions.len() < n {
        eprintln!(
            "warning: {} of {n} initial positions fell outside the grid and were dropped",
            n - positions.len()
        );
    }
    if positions.is_empty() {
        return Err(Error::argument("no initial position lies inside the grid"));
    }
    Ok(positions)
}

/// Paths of many particles through one velocity field.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub initial_positions: Vec<f64>,
    pub paths: Vec<Trajectory>,
}

/// Integrates every particle independently. Results are in input order and
/// do not depend on scheduling.
pub fn integrate_ensemble(
    field: &VelocityField,
    initial_positions: &[f64],
) -> Result<TrajectoryEnsemble> {
    let paths = initial_positions
        .par_iter()
        .map(|&x| integrate_trajectory(field, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryEnsemble {
        initial_positions: initial_positions.to_vec(),
        paths,
    })
}

/// Two particles that swapped order (or met) at recorded frame `frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingViolation {
    pub frame: usize,
    pub lower: usize,
    pub upper: usize,
    pub separation: f64,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn arrival_times(&self, detector: f64, direction: Direction) -> Vec<Option<f64>> {
        self.paths
            .iter()
            .map(|p| p.arrival_time(detector, direction))
            .collect()
    }

    /// Number of paths halted early, by reason.
    pub fn halted(&self) -> (usize, usize) {
        self.paths
            .iter()
            .fold((0, 0), |(nodes, walls), p| match p.status {
                PathStatus::Complete => (nodes, walls),
                PathStatus::NodeDegenerate { .. } => (nodes + 1, walls),
                PathStatus::HitWall { .. } => (nodes, walls + 1),
            })
    }

    /// Positions at frame `k` of the particles still being tracked there.
    pub fn positions_at(&self, k: usize) -> Vec<f64> {
        self.paths
            .iter()
            .filter_map(|p| p.positions.get(k).copied())
            .collect()
    }

    /// Every adjacent pair (in initial order) whose separation drops to the
    /// tolerance or changes sign. Particles halted before a frame are
    /// skipped there.
    pub fn crossing_violations(&self) -> Vec<CrossingViolation> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.initial_positions[a].total_cmp(&self.initial_positions[b]));
        let frames = self.paths.iter().map(Trajectory::len).max().unwrap_or(0);
        let mut out = Vec::new();
        for k in 0..frames {
            let mut prev: Option<(usize, f64)> = None;
            for &j in &order {
                let Some(&x) = self.paths[j].positions.get(k) else {
                    continue;
                };
                if let Some((i, xi)) = prev {
                    let gap = x - xi;
                    let tied = self.initial_positions[i] == self.initial_positions[j];
                    if !tied && gap <= CROSSING_TOLERANCE {
                        out.push(CrossingViolation {
                            frame: k,
                            lower: i,
                            upper: j,
                            separation: gap,
                        });
                    }
                }
                prev = Some((j, x));
            }
        }
        out
    }

    /// Kolmogorov–Smirnov distance between the particle positions at frame
    /// `k` and the normalized cumulative distribution of `density`.
    pub fn ks_distance(&self, grid: &Grid, density: &[f64], k: usize) -> f64 {
        let mut xs = self.positions_at(k);
        if xs.is_empty() {
            return 1.0;
        }
        xs.sort_by(f64::total_cmp);
        let cdf = cumulative_integral(grid, density);
        let total = *cdf.last().expect("nonempty grid");
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(j, &x)| {
                let f = interpolate(grid, &cdf, x) / total;
                ((j + 1) as f64 / n - f).max(f - j as f64 / n)
            })
            .fold(0.0, f64::max)
    }
}

/// One kept particle: perturbed arrival `t_ip`, static arrival `t_i`,
/// `β_i = (t_i − t_ip)/t_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleBeta {
    pub particle: usize,
    pub x_init: f64,
    pub t_ip: f64,
    pub t_i: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Arrived in the window under perturbation but never under the static field.
    NoStaticArrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub particle: usize,
    pub x_init: f64,
    pub t_ip: f64,
    pub reason: ExclusionReason,
}

/// Superarrival statistics of one static/perturbed pair.
#[derive(Debug, Clone)]
pub struct SuperarrivalEnsemble {
    pub n: usize,
    pub perturbed: TrajectoryEnsemble,
    /// Static paths of the particles that arrived inside the window.
    pub static_paths: Vec<(usize, Trajectory)>,
    pub kept: Vec<ParticleBeta>,
    pub excluded: Vec<Exclusion>,
    /// Perturbed arrivals outside `[t_d, t_c]`.
    pub outside_window: usize,
    /// Perturbed paths that never reached the detector.
    pub never_arrived: usize,
    /// `β̃`; `None` for an empty ensemble.
    pub beta_mean: Option<f64>,
    /// Whether `t_i > t_ip` for every kept particle.
    pub all_advanced: bool,
}

impl SuperarrivalEnsemble {
    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn negative_betas(&self) -> usize {
        self.kept.iter().filter(|b| b.beta <= 0.0).count()
    }
}

fn check_pair(a: &VelocityField, b: &VelocityField) -> Result<()> {
    if a.grid != b.grid || a.steps != b.steps {
        return Err(Error::argument(
            "static and perturbed fields differ in grid or cadence",
        ));
    }
    Ok(())
}

fn beta(t_i: f64, t_ip: f64) -> f64 {
    (t_i - t_ip) / t_i
}

/// Mean in index order.
fn ordered_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Keeps the particles whose perturbed arrival lies in `[t_d, t_c]` and
/// compares each with its own static arrival.
pub fn superarrival_betas(
    static_field: &VelocityField,
    perturbed_field: &VelocityField,
    window: &SuperarrivalWindow,
    initial_positions: &[f64],
    detector: f64,
    direction: Direction,
) -> Result<SuperarrivalEnsemble> {
    check_pair(static_field, perturbed_field)?;
    let perturbed = integrate_ensemble(perturbed_field, initial_positions)?;
    let mut candidates = Vec::new();
    let mut outside_window = 0;
    let mut never_arrived = 0;
    for (j, t) in perturbed
        .arrival_times(detector, direction)
        .into_iter()
        .enumerate()
    {
        match t {
            Some(t) if t >= window.t_d && t <= window.t_c => candidates.push((j, t)),
            Some(_) => outside_window += 1,
            None => never_arrived += 1,
        }
    }
    let static_paths = candidates
        .par_iter()
        .map(|&(j, _)| integrate_trajectory(static_field, initial_positions[j]).map(|p| (j, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (&(j, t_ip), (_, path)) in candidates.iter().zip(&static_paths) {
        let x_init = initial_positions[j];
        match path.arrival_time(detector, direction) {
            Some(t_i) => kept.push(ParticleBeta {
                particle: j,
                x_init,
                t_ip,
                t_i,
                beta: beta(t_i, t_ip),
            }),
            None => excluded.push(Exclusion {
                particle: j,
                x_init,
                t_ip,
                reason: ExclusionReason::NoStaticArrival,
            }),
        }
    }
    let beta_mean = ordered_mean(kept.iter().map(|b| b.beta));
    let all_advanced = kept.iter().all(|b| b.t_i > b.t_ip);
    Ok(SuperarrivalEnsemble {
        n: initial_positions.len(),
        perturbed,
        static_paths,
        kept,
        excluded,
        outside_window,
        never_arrived,
        beta_mean,
        all_advanced,
    })
}

/// `β` for every particle that reaches the detector under both fields,
/// without window selection.
pub fn compare_arrivals(
    static_field: &VelocityField,
    perturbed_field: &VelocityField,
    initial_positions: &[f64],
    detector: f64,
    direction: Direction,
) -> Result<Vec<ParticleBeta>> {
    check_pair(static_field, perturbed_field)?;
    let a = integrate_ensemble(static_field, initial_positions)?;
    let b = integrate_ensemble(perturbed_field, initial_positions)?;
    Ok(a.arrival_times(detector, direction)
        .into_iter()
        .zip(b.arrival_times(detector, direction))
        .enumerate()
        .filter_map(|(j, pair)| match pair {
            (Some(t_i), Some(t_ip)) => Some(ParticleBeta {
                particle: j,
                x_init: initial_positions[j],
                t_ip,
                t_i,
                beta: beta(t_i, t_ip),
            }),
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohmian::fields::{velocity_field, DEFAULT_NODE_FLOOR};
    use crate::potentials::BarrierSchedule;
    use crate::solver::propagate;
    use crate::state::init_gaussian;

    fn grid() -> Grid {
        Grid::new(-1.0, 1.0, 8193, 2e-6).unwrap()
    }

    fn spec() -> GaussianPacketSpec {
        GaussianPacketSpec {
            x0: -0.3,
            sigma: 0.05 / 2f64.sqrt(),
            k0: 187.5,
        }
    }

    #[test]
    fn single_quantile_is_the_center() {
        let xs =
            sample_initial_positions(&spec(), 1, SamplingScheme::Quantile, 0, &grid()).unwrap();
        assert_eq!(xs, vec![-0.3]);
    }

    #[test]
    fn odd_quantiles_are_symmetric() {
        let s = spec();
        let xs = sample_initial_positions(&s, 201, SamplingScheme::Quantile, 0, &grid()).unwrap();
        for j in 0..xs.len() {
            let sum = xs[j] + xs[xs.len() - 1 - j];
            assert!((sum - 2.0 * s.x0).abs() <= 1e-12);
        }
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn random_draws_are_seeded_and_have_the_packet_width() {
        let s = spec();
        let g = grid();
        let a = sample_initial_positions(&s, 1000, SamplingScheme::Random, 7, &g).unwrap();
        let b = sample_initial_positions(&s, 1000, SamplingScheme::Random, 7, &g).unwrap();
        assert_eq!(a, b);
        let c = sample_initial_positions(&s, 1000, SamplingScheme::Random, 8, &g).unwrap();
        assert_ne!(a, c);
        let mean = a.iter().sum::<f64>() / 1000.0;
        let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
        assert!((sd / s.sigma - 1.0).abs() <= 0.05, "sd {sd}");
    }

    #[test]
    fn zero_particles_is_an_error() {
        assert!(
            sample_initial_positions(&spec(), 0, SamplingScheme::Quantile, 0, &grid()).is_err()
        );
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!(
            "random".parse::<SamplingScheme>().unwrap(),
            SamplingScheme::Random
        );
        assert!("sobol".parse::<SamplingScheme>().is_err());
    }

    fn free_field(steps: u64) -> VelocityField {
        let g = grid();
        let psi = init_gaussian(&g, &spec()).unwrap();
        let rec = propagate(&psi, &BarrierSchedule::free(&g), steps, 1).unwrap();
        velocity_field(&rec, DEFAULT_NODE_FLOOR).unwrap()
    }

    #[test]
    fn identical_fields_give_zero_betas() {
        let field = free_field(600);
        let xs =
            sample_initial_positions(&spec(), 21, SamplingScheme::Quantile, 0, &grid()).unwrap();
        let betas = compare_arrivals(&field, &field, &xs, 0.1, Direction::Rightward).unwrap();
        assert!(!betas.is_empty());
        assert!(betas.iter().all(|b| b.beta == 0.0));
    }

    #[test]
    fn free_ensemble_keeps_order_and_density() {
        let g = grid();
        let psi = init_gaussian(&g, &spec()).unwrap();
        let rec = propagate(&psi, &BarrierSchedule::free(&g), 300, 1).unwrap();
        let field = velocity_field(&rec, DEFAULT_NODE_FLOOR).unwrap();
        let xs = sample_initial_positions(&spec(), 1000, SamplingScheme::Quantile, 0, &g).unwrap();
        let ens = integrate_ensemble(&field, &xs).unwrap();
        assert_eq!(ens.halted(), (0, 0));
        assert!(ens.crossing_violations().is_empty());
        for k in [0, 150, 300] {
            let d = ens.ks_distance(&g, &rec.frame_density(k), k);
            assert!(d <= 0.05, "frame {k}: KS {d}");
        }
        assert!(ens.ks_distance(&g, &rec.frame_density(0), 0) <= 1e-3);
    }

    #[test]
    fn crossing_is_detected() {
        let path = |x: Vec<f64>| Trajectory {
            x_init: x[0],
            steps: (0..x.len() as u64).collect(),
            times: (0..x.len()).map(|k| k as f64).collect(),
            positions: x,
            status: PathStatus::Complete,
        };
        let ens = TrajectoryEnsemble {
            initial_positions: vec![0.0, 0.1],
            paths: vec![path(vec![0.0, 0.05, 0.2]), path(vec![0.1, 0.1, 0.15])],
        };
        let v = ens.crossing_violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].frame, 2);
    }

    #[test]
    fn mean_is_in_index_order() {
        assert_eq!(
            ordered_mean([0.1, 0.2, 0.3].into_iter()),
            Some((0.1 + 0.2 + 0.3) / 3.0)
        );
        assert_eq!(ordered_mean(std::iter::empty()), None);
    }
}
