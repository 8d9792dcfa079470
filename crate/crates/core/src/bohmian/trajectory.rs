//! Single-particle guidance: `dx/dt = v(x, t)` integrated with classical RK4.
//!
//! The field is known only at lattice sites and recorded instants, so `v` is
//! interpolated linearly in both. Each frame interval is covered by RK4
//! sub-steps sized so that a sub-step moves the particle by at most a
//! fraction of a lattice cell and `h·|∂v/∂x|` stays small; near the sharp
//! velocity spikes of interference minima this keeps neighbouring particles
//! ordered.

use serde::{Deserialize, Serialize};

use super::fields::VelocityField;
use crate::error::{Error, Result};

/// Largest displacement per sub-step, in lattice cells.
const MAX_CELL_FRACTION: f64 = 0.25;
/// Largest `h·|∂v/∂x|` per sub-step.
const MAX_STRAIN: f64 = 0.1;
/// Node retries halve the sub-step down to this fraction of its first size.
const NODE_RETRY_FLOOR: f64 = 1.0 / 16.0;
/// Hard floor on the adaptive sub-step, as a fraction of the interval.
const MIN_SUBSTEP: f64 = 1.0 / 65536.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum PathStatus {
    /// Integrated over the whole field.
    Complete,
    /// Halted because the particle ran into masked (node) sites.
    NodeDegenerate { t: f64 },
    /// Halted at a box wall.
    HitWall { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x_init: f64,
    /// Sampled at the field's recorded instants; shorter than the field when
    /// the path was halted.
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub status: PathStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.status == PathStatus::Complete
    }

    pub fn arrival_time(&self, detector: f64, direction: Direction) -> Option<f64> {
        arrival_time(&self.times, &self.positions, detector, direction)
    }
}

/// Side of the detector a particle must reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// First instant with `x ≤ detector` (reflection detector on the left).
    Leftward,
    /// First instant with `x ≥ detector` (transmission detector on the right).
    Rightward,
}

/// First crossing of `detector`, linearly interpolated between samples.
pub fn arrival_time(
    times: &[f64],
    positions: &[f64],
    detector: f64,
    direction: Direction,
) -> Option<f64> {
    let reached = |x: f64| match direction {
        Direction::Leftward => x <= detector,
        Direction::Rightward => x >= detector,
    };
    let k = positions.iter().position(|&x| reached(x))?;
    if k == 0 {
        return Some(times[0]);
    }
    let (x0, x1) = (positions[k - 1], positions[k]);
    let f = (detector - x0) / (x1 - x0);
    Some(times[k - 1] + f * (times[k] - times[k - 1]))
}

pub fn integrate_trajectory(field: &VelocityField, x_init: f64) -> Result<Trajectory> {
    let grid = &field.grid;
    if !x_init.is_finite() || !grid.strictly_inside(x_init) {
        return Err(Error::argument(format!(
            "initial position {x_init} lies outside the grid"
        )));
    }
    if field.is_empty() {
        return Err(Error::argument("velocity field has no frames"));
    }
    let n = field.len();
    let mut path = Trajectory {
        x_init,
        steps: Vec::with_capacity(n),
        times: Vec::with_capacity(n),
        positions: Vec::with_capacity(n),
        status: PathStatus::Complete,
    };
    path.steps.push(field.steps[0]);
    path.times.push(field.times[0]);
    path.positions.push(x_init);
    let dx = grid.dx();
    let mut x = x_init;
    for k in 0..n - 1 {
        let span = field.times[k + 1] - field.times[k];
        let mut tau = 0.0;
        while tau < span {
            let remaining = span - tau;
            let mut h = remaining;
            if let Some((v, g)) = field.sample(k, tau / span, x) {
                if v != 0.0 {
                    h = h.min(MAX_CELL_FRACTION * dx / v.abs());
                }
                if g != 0.0 {
                    h = h.min(MAX_STRAIN / g.abs());
                }
            }
            h = h.max(MIN_SUBSTEP * span).min(remaining);
            let retry_floor = h * NODE_RETRY_FLOOR;
            let next = loop {
                if let Some(xn) = rk4(field, k, span, tau, h, x) {
                    break Some(xn);
                }
                if h <= retry_floor {
                    break None;
                }
                h *= 0.5;
            };
            let Some(xn) = next else {
                path.status = PathStatus::NodeDegenerate {
                    t: field.times[k] + tau,
                };
                return Ok(path);
            };
            tau += h;
            if xn <= grid.x_min() || xn >= grid.x_max() {
                let t = field.times[k] + tau.min(span);
                path.status = PathStatus::HitWall { t };
                return Ok(path);
            }
            x = xn;
        }
        path.steps.push(field.steps[k + 1]);
        path.times.push(field.times[k + 1]);
        path.positions.push(x);
    }
    Ok(path)
}

/// One classical RK4 step of size `h` from `tau` inside interval `k`.
#[inline]
fn rk4(field: &VelocityField, k: usize, span: f64, tau: f64, h: f64, x: f64) -> Option<f64> {
    let v = |t: f64, x: f64| field.sample(k, (t / span).min(1.0), x).map(|s| s.0);
    let k1 = v(tau, x)?;
    let k2 = v(tau + 0.5 * h, x + 0.5 * h * k1)?;
    let k3 = v(tau + 0.5 * h, x + 0.5 * h * k2)?;
    let k4 = v(tau + h, x + h * k3)?;
    Some(x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
}
