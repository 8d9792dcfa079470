//! Newton-like form of the guidance law: `m·ẍ = −∂(V + Q)/∂x` along a path.

use serde::{Deserialize, Serialize};

use super::fields::QuantumPotentialField;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::potentials::BarrierSchedule;
use crate::units::MASS;

/// Why a path sample carries no residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFlag {
    Ok,
    /// First or last sample; no second difference.
    Endpoint,
    /// A node lies inside the force stencil.
    Masked,
    /// Within two cells of a barrier edge while the barrier is up.
    BarrierEdge,
    /// The force bends across the span the particle covers between samples,
    /// so the second difference of the path no longer measures it locally.
    Unresolved,
}

/// Largest departure of the force from a straight line across the sample
/// span, relative to `|force| + 1`, for a sample to count as resolved.
pub const MAX_FORCE_BEND: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct NewtonResidual {
    pub times: Vec<f64>,
    /// `m·ẍ` from the second difference of the path.
    pub lhs: Vec<f64>,
    /// `−∂(V + Q)/∂x` at the particle.
    pub rhs: Vec<f64>,
    /// `|lhs − rhs| / (|rhs| + 1)`; `None` where flagged.
    pub residual: Vec<Option<f64>>,
    pub flags: Vec<SampleFlag>,
}

impl NewtonResidual {
    pub fn valid(&self) -> impl Iterator<Item = f64> + '_ {
        self.residual.iter().filter_map(|r| *r)
    }

    pub fn median(&self) -> Option<f64> {
        median(self.valid().collect())
    }

    pub fn max(&self) -> Option<f64> {
        self.valid().reduce(f64::max)
    }
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// `∂Q/∂x` at `x` in frame `k`: central differences at the two bracketing
/// sites, then linear interpolation.
fn q_slope(field: &QuantumPotentialField, k: usize, x: f64) -> Option<f64> {
    let g = &field.grid;
    let (i, f) = g.locate(x);
    if i == 0 || i + 2 >= g.n_points() {
        return None;
    }
    let mask = &field.node_mask[k];
    if mask[i - 1..=i + 2].iter().any(|&m| m) {
        return None;
    }
    let q = &field.q_frames[k];
    let h2 = 2.0 * g.dx();
    let d0 = (q[i + 1] - q[i - 1]) / h2;
    let d1 = (q[i + 2] - q[i]) / h2;
    Some(d0 * (1.0 - f) + d1 * f)
}

/// Residual of the Newton-like law at every interior path sample. The path
/// must have been integrated on the record that produced `q_field`.
pub fn newton_residual(
    q_field: &QuantumPotentialField,
    path: &Trajectory,
    schedule: &BarrierSchedule,
) -> Result<NewtonResidual> {
    if path.len() > q_field.times.len() || path.steps[..] != q_field.steps[..path.len()] {
        return Err(Error::argument(
            "trajectory does not match the potential field cadence",
        ));
    }
    let g = &q_field.grid;
    let edge_band = 2.0 * g.dx();
    let n = path.len();
    let mut out = NewtonResidual {
        times: path.times.clone(),
        lhs: vec![f64::NAN; n],
        rhs: vec![f64::NAN; n],
        residual: vec![None; n],
        flags: vec![SampleFlag::Endpoint; n],
    };
    let x = &path.positions;
    let t = &path.times;
    for k in 1..n.saturating_sub(1) {
        let (h0, h1) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        let accel = 2.0 * ((x[k + 1] - x[k]) / h1 - (x[k] - x[k - 1]) / h0) / (h0 + h1);
        out.lhs[k] = MASS * accel;
        let near_edge = [schedule.left_edge(), schedule.right_edge()]
            .iter()
            .any(|e| (x[k] - e).abs() <= edge_band);
        if near_edge && schedule.height_at(t[k]) != 0.0 {
            out.flags[k] = SampleFlag::BarrierEdge;
            continue;
        }
        let Some(slope) = q_slope(q_field, k, x[k]) else {
            out.flags[k] = SampleFlag::Masked;
            continue;
        };
        // V is piecewise constant; away from its edges only Q exerts force.
        out.rhs[k] = -slope;
        let bend = match (q_slope(q_field, k, x[k - 1]), q_slope(q_field, k, x[k + 1])) {
            (Some(a), Some(b)) => (a - 2.0 * slope + b).abs(),
            _ => f64::INFINITY,
        };
        if bend > MAX_FORCE_BEND * (slope.abs() + 1.0) {
            out.flags[k] = SampleFlag::Unresolved;
            continue;
        }
        out.flags[k] = SampleFlag::Ok;
        out.residual[k] = Some((out.lhs[k] - out.rhs[k]).abs() / (out.rhs[k].abs() + 1.0));
    }
    Ok(out)
}
