//! Velocity and quantum-potential fields extracted from recorded frames.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::PropagationRecord;
use crate::state::Grid;
use crate::units::{KINETIC, VELOCITY_SCALE};

/// Density below which a site counts as a node.
pub const DEFAULT_NODE_FLOOR: f64 = 1e-14;

/// First derivative by second-order central differences, one-sided
/// second-order stencils at the two ends.
pub fn derivative(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let inv = 1.0 / (2.0 * grid.dx());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv;
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) * inv;
    }
    out
}

fn node_mask(frame: &[Complex64], node_floor: f64) -> Vec<bool> {
    frame.iter().map(|a| a.norm_sqr() < node_floor).collect()
}

/// `v = (ħ/m)·Im(ψ* ∂ψ/∂x)/|ψ|²` on one frame. Masked sites hold 0.
pub fn velocity_frame(grid: &Grid, frame: &[Complex64], node_floor: f64) -> (Vec<f64>, Vec<bool>) {
    let d = derivative(grid, frame);
    let mask = node_mask(frame, node_floor);
    let v = frame
        .iter()
        .zip(&d)
        .zip(&mask)
        .map(|((a, da), &masked)| {
            if masked {
                0.0
            } else {
                VELOCITY_SCALE * (a.conj() * da).im / a.norm_sqr()
            }
        })
        .collect();
    (v, mask)
}

/// Phase-gradient form of the velocity, `(ħ/m)·∂S/∂x`, from wrapped phase
/// differences to both neighbours. Used as a cross-check of the ratio form.
pub fn phase_gradient_velocity(
    grid: &Grid,
    frame: &[Complex64],
    node_floor: f64,
) -> Vec<Option<f64>> {
    let n = frame.len();
    let dphi = |i: usize, j: usize| (frame[j] * frame[i].conj()).arg();
    (0..n)
        .map(|i| {
            if i == 0
                || i == n - 1
                || frame[i - 1..=i + 1]
                    .iter()
                    .any(|a| a.norm_sqr() < node_floor)
            {
                return None;
            }
            Some(VELOCITY_SCALE * (dphi(i - 1, i) + dphi(i, i + 1)) / (2.0 * grid.dx()))
        })
        .collect()
}

/// Bohmian velocity per site per recorded instant.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub grid: Grid,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub v_frames: Vec<Vec<f64>>,
    pub node_mask: Vec<Vec<bool>>,
}

pub fn velocity_field(record: &PropagationRecord, node_floor: f64) -> Result<VelocityField> {
    check_record(record, node_floor)?;
    let grid = record.grid;
    let (v_frames, node_mask) = record
        .frames
        .par_iter()
        .map(|f| velocity_frame(&grid, f, node_floor))
        .unzip();
    Ok(VelocityField {
        grid,
        steps: record.steps.clone(),
        times: record.times.clone(),
        v_frames,
        node_mask,
    })
}

/// Probability current `(ħ/m)·Im(ψ̄ᵢ* ψ̄ᵢ₊₁)/dx` on the links between sites,
/// with `ψ̄` the average of two consecutive frames. This is the current that
/// makes the Crank–Nicolson density obey a discrete continuity equation
/// exactly.
fn link_current(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Vec<f64> {
    let inv = VELOCITY_SCALE / grid.dx();
    let mean = |i: usize| 0.5 * (a[i] + b[i]);
    (0..a.len() - 1)
        .map(|i| inv * (mean(i).conj() * mean(i + 1)).im)
        .collect()
}

/// Velocity that transports the recorded density the way the propagator
/// does: the link currents of the two adjacent half steps, averaged onto
/// each site and divided by the site density.
///
/// The instantaneous form of [`velocity_field`] omits the time-discretization
/// factor `cos²(ω dt/2)` of the Crank–Nicolson current, so its particles run
/// ahead of the density they should follow by about `(E dt/2ħ)²`. Requires
/// every step to be recorded.
pub fn transport_velocity_field(
    record: &PropagationRecord,
    node_floor: f64,
) -> Result<VelocityField> {
    check_record(record, node_floor)?;
    if record.len() < 2 || record.steps.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::argument(
            "transport velocity needs at least two consecutive recorded steps",
        ));
    }
    let grid = record.grid;
    let last = record.len() - 1;
    let currents: Vec<Vec<f64>> = (0..last)
        .into_par_iter()
        .map(|k| link_current(&grid, &record.frames[k], &record.frames[k + 1]))
        .collect();
    let (v_frames, node_mask) = (0..=last)
        .into_par_iter()
        .map(|k| {
            let before = &currents[k.saturating_sub(1)];
            let after = &currents[k.min(last - 1)];
            let frame = &record.frames[k];
            let mask = node_mask(frame, node_floor);
            let n = frame.len();
            let mut v = vec![0.0; n];
            for i in 1..n - 1 {
                if !mask[i] {
                    let j = 0.25 * (before[i - 1] + before[i] + after[i - 1] + after[i]);
                    v[i] = j / frame[i].norm_sqr();
                }
            }
            (v, mask)
        })
        .unzip();
    Ok(VelocityField {
        grid,
        steps: record.steps.clone(),
        times: record.times.clone(),
        v_frames,
        node_mask,
    })
}

fn check_record(record: &PropagationRecord, node_floor: f64) -> Result<()> {
    if record.is_empty() {
        return Err(Error::argument("propagation record has no frames"));
    }
    if !(node_floor > 0.0) {
        return Err(Error::config("node_floor", "must be positive"));
    }
    Ok(())
}

impl VelocityField {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Velocity and its spatial slope at `x`, linearly interpolated in space
    /// and between frames `k` and `k + 1` (`theta` ∈ [0, 1]). `None` when any
    /// site involved is a node.
    #[inline]
    pub fn sample(&self, k: usize, theta: f64, x: f64) -> Option<(f64, f64)> {
        let (i, f) = self.grid.locate(x);
        let at = |frame: usize| -> Option<(f64, f64)> {
            let mask = &self.node_mask[frame];
            if mask[i] || mask[i + 1] {
                return None;
            }
            let v = &self.v_frames[frame];
            Some((
                v[i] * (1.0 - f) + v[i + 1] * f,
                (v[i + 1] - v[i]) / self.grid.dx(),
            ))
        };
        if theta <= 0.0 || k + 1 >= self.len() {
            return at(k);
        }
        let (v0, g0) = at(k)?;
        let (v1, g1) = at(k + 1)?;
        Some((v0 + theta * (v1 - v0), g0 + theta * (g1 - g0)))
    }
}

/// `Q = −(ħ²/2m)·R″/R` on one frame, `R = |ψ|`. Masked sites hold 0.
pub fn quantum_potential_frame(
    grid: &Grid,
    frame: &[Complex64],
    node_floor: f64,
) -> (Vec<f64>, Vec<bool>) {
    let n = frame.len();
    let r: Vec<f64> = frame.iter().map(|a| a.norm()).collect();
    let mask = node_mask(frame, node_floor);
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let second = |i: usize| -> f64 {
        if i == 0 {
            (2.0 * r[0] - 5.0 * r[1] + 4.0 * r[2] - r[3]) * inv_dx2
        } else if i == n - 1 {
            (2.0 * r[n - 1] - 5.0 * r[n - 2] + 4.0 * r[n - 3] - r[n - 4]) * inv_dx2
        } else {
            (r[i + 1] - 2.0 * r[i] + r[i - 1]) * inv_dx2
        }
    };
    let q = (0..n)
        .map(|i| {
            if mask[i] {
                0.0
            } else {
                -KINETIC * second(i) / r[i]
            }
        })
        .collect();
    (q, mask)
}

#[derive(Debug, Clone)]
pub struct QuantumPotentialField {
    pub grid: Grid,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub q_frames: Vec<Vec<f64>>,
    pub node_mask: Vec<Vec<bool>>,
}

pub fn quantum_potential(
    record: &PropagationRecord,
    node_floor: f64,
) -> Result<QuantumPotentialField> {
    check_record(record, node_floor)?;
    let grid = record.grid;
    let (q_frames, node_mask) = record
        .frames
        .par_iter()
        .map(|f| quantum_potential_frame(&grid, f, node_floor))
        .unzip();
    Ok(QuantumPotentialField {
        grid,
        steps: record.steps.clone(),
        times: record.times.clone(),
        q_frames,
        node_mask,
    })
}

/// Positions of local minima of `Q` with `lo ≤ x ≤ hi`, restricted to sites
/// whose density is at least `min_density`.
pub fn quantum_potential_wells(
    grid: &Grid,
    q: &[f64],
    density: &[f64],
    lo: f64,
    hi: f64,
    min_density: f64,
) -> Vec<f64> {
    (1..q.len() - 1)
        .filter(|&i| {
            let x = grid.x(i);
            x >= lo
                && x <= hi
                && density[i - 1..=i + 1].iter().all(|&d| d >= min_density)
                && q[i] < q[i - 1]
                && q[i] <= q[i + 1]
        })
        .map(|i| grid.x(i))
        .collect()
}

/// L2 norms of `∂ρ/∂t`, `∂(ρv)/∂x` and their sum at interior frame `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityResidual {
    pub time_term: f64,
    pub flux_term: f64,
    pub residual: f64,
}

/// Continuity-equation check at frame `k` using centered frame differences
/// for `∂ρ/∂t` and the current `ρv = (ħ/m)·Im(ψ*∂ψ/∂x)`.
pub fn continuity_residual(record: &PropagationRecord, k: usize) -> Result<ContinuityResidual> {
    if k == 0 || k + 1 >= record.len() {
        return Err(Error::argument(
            "continuity check needs frames on both sides",
        ));
    }
    let grid = &record.grid;
    let before = record.frame_density(k - 1);
    let after = record.frame_density(k + 1);
    let span = record.times[k + 1] - record.times[k - 1];
    let frame = &record.frames[k];
    let d = derivative(grid, frame);
    let current: Vec<f64> = frame
        .iter()
        .zip(&d)
        .map(|(a, da)| VELOCITY_SCALE * (a.conj() * da).im)
        .collect();
    let n = frame.len();
    let (mut tt, mut ff, mut rr) = (0.0, 0.0, 0.0);
    for i in 1..n - 1 {
        let drho = (after[i] - before[i]) / span;
        let dflux = (current[i + 1] - current[i - 1]) / (2.0 * grid.dx());
        tt += drho * drho;
        ff += dflux * dflux;
        rr += (drho + dflux).powi(2);
    }
    let s = grid.dx();
    Ok(ContinuityResidual {
        time_term: (tt * s).sqrt(),
        flux_term: (ff * s).sqrt(),
        residual: (rr * s).sqrt(),
    })
}
