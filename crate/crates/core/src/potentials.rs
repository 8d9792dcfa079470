//! Rectangular barrier with a piecewise-linear height schedule.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampMode {
    /// Height fixed at the reference value.
    Static,
    /// Reference height until onset, linearly down to zero over the duration.
    Lowering,
    /// Zero until onset, linearly up to the reference height over the duration.
    Raising,
}

impl fmt::Display for RampMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RampMode::Static => "static",
            RampMode::Lowering => "lowering",
            RampMode::Raising => "raising",
        })
    }
}

impl FromStr for RampMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(RampMode::Static),
            "lowering" => Ok(RampMode::Lowering),
            "raising" => Ok(RampMode::Raising),
            other => Err(Error::config(
                "mode",
                format!("unknown barrier mode `{other}` (static|lowering|raising)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSchedule {
    pub center: f64,
    pub width: f64,
    /// Reference height `V0`.
    pub height: f64,
    pub mode: RampMode,
    /// Perturbation onset `t_p`.
    pub onset: f64,
    /// Ramp duration `ε`.
    pub duration: f64,
}

impl BarrierSchedule {
    pub fn fixed(center: f64, width: f64, height: f64) -> Self {
        BarrierSchedule {
            center,
            width,
            height,
            mode: RampMode::Static,
            onset: 0.0,
            duration: 0.0,
        }
    }

    /// Zero potential everywhere. The support is irrelevant but kept valid.
    pub fn free(grid: &Grid) -> Self {
        let mid = 0.5 * (grid.x_min() + grid.x_max());
        Self::fixed(mid, grid.dx(), 0.0)
    }

    pub fn ramped(
        center: f64,
        width: f64,
        height: f64,
        mode: RampMode,
        onset: f64,
        duration: f64,
    ) -> Self {
        BarrierSchedule {
            center,
            width,
            height,
            mode,
            onset,
            duration,
        }
    }

    /// Same barrier with the mode replaced by `Static`.
    pub fn as_static(&self) -> Self {
        BarrierSchedule {
            mode: RampMode::Static,
            ..*self
        }
    }

    pub fn left_edge(&self) -> f64 {
        self.center - 0.5 * self.width
    }

    pub fn right_edge(&self) -> f64 {
        self.center + 0.5 * self.width
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::config("x_c", "must be finite"));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::config("w", "barrier width must be positive"));
        }
        if !(self.height >= 0.0) || !self.height.is_finite() {
            return Err(Error::config("v0", "barrier height must be non-negative"));
        }
        if self.mode != RampMode::Static {
            if !(self.duration > 0.0) || !self.duration.is_finite() {
                return Err(Error::config("epsilon", "ramp duration must be positive"));
            }
            if !(self.onset >= 0.0) || !self.onset.is_finite() {
                return Err(Error::config("t_p", "onset must be non-negative"));
            }
        }
        if !(grid.strictly_inside(self.left_edge()) && grid.strictly_inside(self.right_edge())) {
            return Err(Error::config(
                "x_c",
                "barrier support must lie strictly inside the grid",
            ));
        }
        Ok(())
    }

    /// Barrier height at time `t`.
    pub fn height_at(&self, t: f64) -> f64 {
        let end = self.onset + self.duration;
        // Dividing by the rounded span keeps the joint at `end` continuous.
        let span = end - self.onset;
        match self.mode {
            RampMode::Static => self.height,
            RampMode::Lowering => {
                if t <= self.onset {
                    self.height
                } else if t >= end {
                    0.0
                } else {
                    self.height * (1.0 - (t - self.onset) / span)
                }
            }
            RampMode::Raising => {
                if t <= self.onset {
                    0.0
                } else if t >= end {
                    self.height
                } else {
                    self.height * ((t - self.onset) / span)
                }
            }
        }
    }

    /// Lattice sites covered by the closed interval `[x_c − w/2, x_c + w/2]`.
    /// `None` when no site falls inside.
    pub fn support(&self, grid: &Grid) -> Result<Option<RangeInclusive<usize>>> {
        self.validate(grid)?;
        let (lo, hi) = (self.left_edge(), self.right_edge());
        let mut first = None;
        let mut last = None;
        for i in 0..grid.n_points() {
            let x = grid.x(i);
            if x >= lo && x <= hi {
                first.get_or_insert(i);
                last = Some(i);
            }
        }
        Ok(first.zip(last).map(|(a, b)| a..=b))
    }

    /// `V(x_i, t)` on every lattice site.
    pub fn potential_row(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        let mut row = vec![0.0; grid.n_points()];
        if let Some(range) = self.support(grid)? {
            let h = self.height_at(t);
            for v in &mut row[range] {
                *v = h;
            }
        }
        Ok(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TP: f64 = 8e-4;
    const EPS: f64 = 2e-5;

    fn grid() -> Grid {
        Grid::new(-1.0, 1.0, 8193, 2e-6).unwrap()
    }

    fn lowering(v0: f64) -> BarrierSchedule {
        BarrierSchedule::ramped(0.0, 0.016, v0, RampMode::Lowering, TP, EPS)
    }

    #[test]
    fn lowering_ramp_values() {
        let s = lowering(10.0);
        assert_eq!(s.height_at(TP), 10.0);
        assert!((s.height_at(TP + EPS / 2.0) - 5.0).abs() < 1e-12);
        assert_eq!(s.height_at(TP + EPS), 0.0);
        assert_eq!(s.height_at(0.0), 10.0);
        assert_eq!(s.height_at(1.0), 0.0);
    }

    #[test]
    fn raising_reaches_full_height() {
        let s = BarrierSchedule::ramped(0.0, 0.016, 7.0, RampMode::Raising, TP, EPS);
        assert_eq!(s.height_at(TP), 0.0);
        assert_eq!(s.height_at(TP + EPS), 7.0);
        assert_eq!(s.height_at(TP + 10.0 * EPS), 7.0);
    }

    #[test]
    fn static_ignores_ramp_parameters() {
        let s = BarrierSchedule::fixed(0.0, 0.016, 3.0);
        for t in [0.0, TP, TP + EPS, 1.0] {
            assert_eq!(s.height_at(t), 3.0);
        }
    }

    #[test]
    fn null_potential_row() {
        let row = BarrierSchedule::fixed(0.0, 0.016, 0.0)
            .potential_row(&grid(), 0.0)
            .unwrap();
        assert!(row.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_barrier_support() {
        let g = grid();
        let row = lowering(1.0).potential_row(&g, 0.0).unwrap();
        for (i, v) in row.iter().enumerate() {
            let inside = g.x(i).abs() <= 0.008;
            assert_eq!(*v != 0.0, inside, "site {i} x={}", g.x(i));
        }
        // ±0.008 sits between sites 32 and 33 away from the center.
        let support = lowering(1.0).support(&g).unwrap().unwrap();
        assert_eq!(support, 4096 - 32..=4096 + 32);
    }

    #[test]
    fn completed_lowering_is_zero() {
        let row = lowering(1.0).potential_row(&grid(), TP + EPS).unwrap();
        assert!(row.iter().all(|&v| v == 0.0));
        let row = lowering(1.0).potential_row(&grid(), 1e-2).unwrap();
        assert!(row.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn support_outside_grid_is_rejected() {
        let s = BarrierSchedule::fixed(0.995, 0.016, 1.0);
        assert!(matches!(
            s.potential_row(&grid(), 0.0),
            Err(Error::Config { .. })
        ));
        let s = BarrierSchedule::fixed(0.0, 0.0, 1.0);
        assert!(s.validate(&grid()).is_err());
        let s = BarrierSchedule::ramped(0.0, 0.01, 1.0, RampMode::Raising, TP, 0.0);
        assert!(
            matches!(s.validate(&grid()), Err(Error::Config { ref field, .. }) if field == "epsilon")
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("lowering".parse::<RampMode>().unwrap(), RampMode::Lowering);
        assert!("sideways".parse::<RampMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_mode() -> impl Strategy<Value = RampMode> {
            prop_oneof![
                Just(RampMode::Static),
                Just(RampMode::Lowering),
                Just(RampMode::Raising)
            ]
        }

        proptest! {
            #[test]
            fn height_stays_in_range(
                mode in any_mode(),
                v0 in 0.0f64..1e5,
                onset in 0.0f64..1e-3,
                duration in 1e-7f64..1e-3,
                t in 0.0f64..3e-3,
            ) {
                let s = BarrierSchedule::ramped(0.0, 0.016, v0, mode, onset, duration);
                let h = s.height_at(t);
                prop_assert!(h >= 0.0 && h <= v0);
            }

            #[test]
            fn ramp_joints_are_continuous(
                v0 in 1.0f64..1e5,
                onset in 0.0f64..1e-3,
                duration in 1e-7f64..1e-3,
            ) {
                for mode in [RampMode::Lowering, RampMode::Raising] {
                    let s = BarrierSchedule::ramped(0.0, 0.016, v0, mode, onset, duration);
                    let end = onset + duration;
                    let tol = 4.0 * f64::EPSILON * v0;
                    prop_assert!((s.height_at(end.next_down()) - s.height_at(end)).abs() <= tol + v0 * (end - end.next_down()) / duration);
                    prop_assert!((s.height_at(onset.next_up()) - s.height_at(onset)).abs() <= tol + v0 * (onset.next_up() - onset) / duration);
                }
            }

            #[test]
            fn support_is_time_independent(t1 in 0.0f64..2e-3, t2 in 0.0f64..2e-3) {
                let g = Grid::new(-1.0, 1.0, 1025, 2e-6).unwrap();
                let s = BarrierSchedule::ramped(0.0, 0.016, 5.0, RampMode::Lowering, 8e-4, 2e-5);
                let r1 = s.potential_row(&g, t1).unwrap();
                let r2 = s.potential_row(&g, t2).unwrap();
                let support = s.support(&g).unwrap().unwrap();
                for i in 0..g.n_points() {
                    if !support.contains(&i) {
                        prop_assert_eq!(r1[i], 0.0);
                        prop_assert_eq!(r2[i], 0.0);
                    }
                }
            }
        }
    }
}
