//! Detector probabilities, the superarrival window and derived figures
//! (`η`, signal velocity).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::BarrierSchedule;
use crate::solver::PropagationRecord;
use crate::state::integrate_density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Probability in `[x_min, x′]`.
    Reflection,
    /// Probability in `[x″, x_max]`.
    Transmission,
}

/// Probability accumulated beyond a detector, one value per recorded frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySeries {
    pub kind: DetectorKind,
    pub detector_position: f64,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProbabilitySeries {
    pub fn new(
        kind: DetectorKind,
        detector_position: f64,
        steps: Vec<u64>,
        times: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if steps.len() != times.len() || times.len() != values.len() {
            return Err(Error::argument("series columns have different lengths"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::argument("series times must be strictly increasing"));
        }
        Ok(ProbabilitySeries {
            kind,
            detector_position,
            steps,
            times,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_value(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same series with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ProbabilitySeries {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

pub fn detector_series(
    record: &PropagationRecord,
    kind: DetectorKind,
    detector_position: f64,
) -> Result<ProbabilitySeries> {
    let grid = &record.grid;
    if !grid.strictly_inside(detector_position) {
        let field = match kind {
            DetectorKind::Reflection => "x_prime",
            DetectorKind::Transmission => "x_double_prime",
        };
        return Err(Error::config(
            field,
            "detector must lie strictly inside the grid",
        ));
    }
    let (a, b) = match kind {
        DetectorKind::Reflection => (grid.x_min(), detector_position),
        DetectorKind::Transmission => (detector_position, grid.x_max()),
    };
    let values = (0..record.len())
        .map(|k| integrate_density(grid, &record.frame_density(k), a, b))
        .collect::<Result<Vec<_>>>()?;
    ProbabilitySeries::new(
        kind,
        detector_position,
        record.steps.clone(),
        record.times.clone(),
        values,
    )
}

/// Knobs of the window detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCriteria {
    /// Minimum excess (absolute probability) that opens the window.
    pub threshold: f64,
    /// Consecutive samples with positive excess required at the onset.
    pub persistence: usize,
}

impl Default for WindowCriteria {
    fn default() -> Self {
        WindowCriteria {
            threshold: 1e-4,
            persistence: 3,
        }
    }
}

/// Interval `[t_d, t_c]` during which the perturbed curve exceeds the
/// reference curve, with the windowed integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperarrivalWindow {
    pub t_d: f64,
    pub t_c: f64,
    pub delta_t: f64,
    /// `(I_p − I_s)/I_s`
    pub eta: f64,
    pub i_p: f64,
    pub i_s: f64,
    /// Index of the sample at `t_d`.
    pub onset_index: usize,
    /// Largest `perturbed − reference` inside the window.
    pub peak_excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoWindow {
    /// The excess never passed the threshold with the required persistence.
    NoDeviation,
    /// The excess opened but never returned to zero within the record.
    NoCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowOutcome {
    Detected(SuperarrivalWindow),
    NotDetected(NoWindow),
}

impl WindowOutcome {
    pub fn window(&self) -> Option<&SuperarrivalWindow> {
        match self {
            WindowOutcome::Detected(w) => Some(w),
            WindowOutcome::NotDetected(_) => None,
        }
    }
}

/// Locates the superarrival window.
///
/// Every stretch of positive excess is a candidate: its onset `t_d` is the
/// first sample whose excess is above the threshold and stays positive for
/// `persistence` samples, and `t_c` is the first later zero of the linearly
/// interpolated excess. When a fast ramp produces more than one candidate,
/// the one with the largest excess integral `I_p − I_s` is returned.
pub fn detect_window(
    perturbed: &ProbabilitySeries,
    unperturbed: &ProbabilitySeries,
    criteria: WindowCriteria,
) -> Result<WindowOutcome> {
    let candidates = candidate_windows(perturbed, unperturbed, criteria)?;
    let best = candidates
        .iter()
        .copied()
        .fold(None::<SuperarrivalWindow>, |best, w| match best {
            Some(b) if b.i_p - b.i_s >= w.i_p - w.i_s => Some(b),
            _ => Some(w),
        });
    Ok(match best {
        Some(w) => WindowOutcome::Detected(w),
        None if open_excess(perturbed, unperturbed, criteria) => {
            WindowOutcome::NotDetected(NoWindow::NoCrossing)
        }
        None => WindowOutcome::NotDetected(NoWindow::NoDeviation),
    })
}

/// All closed windows in time order.
pub fn candidate_windows(
    perturbed: &ProbabilitySeries,
    unperturbed: &ProbabilitySeries,
    criteria: WindowCriteria,
) -> Result<Vec<SuperarrivalWindow>> {
    if perturbed.times != unperturbed.times {
        return Err(Error::argument(
            "series are sampled on different time grids",
        ));
    }
    if !(criteria.threshold > 0.0) {
        return Err(Error::config("threshold", "must be positive"));
    }
    if criteria.persistence == 0 {
        return Err(Error::config("persistence", "must be at least 1"));
    }
    let times = &perturbed.times;
    let diff = excess(perturbed, unperturbed);
    let n = diff.len();
    let mut windows = Vec::new();
    let mut k = 0;
    while let Some(d) = next_onset(&diff, k, criteria) {
        let Some(c) = (d + 1..n).find(|&j| diff[j] <= 0.0) else {
            break;
        };
        // Zero of the linear interpolant of the excess on [c - 1, c].
        let frac = diff[c - 1] / (diff[c - 1] - diff[c]);
        let t_c = times[c - 1] + frac * (times[c] - times[c - 1]);
        let t_d = times[d];
        let i_p = window_integral(times, &perturbed.values, d, c, frac);
        let i_s = window_integral(times, &unperturbed.values, d, c, frac);
        if !(i_s > 0.0) {
            return Err(Error::DegenerateTiming(
                "reference integral over the window vanishes".into(),
            ));
        }
        let peak_excess = diff[d..c].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        windows.push(SuperarrivalWindow {
            t_d,
            t_c,
            delta_t: t_c - t_d,
            eta: (i_p - i_s) / i_s,
            i_p,
            i_s,
            onset_index: d,
            peak_excess,
        });
        k = c;
    }
    Ok(windows)
}

fn excess(perturbed: &ProbabilitySeries, unperturbed: &ProbabilitySeries) -> Vec<f64> {
    perturbed
        .values
        .iter()
        .zip(&unperturbed.values)
        .map(|(p, s)| p - s)
        .collect()
}

fn next_onset(diff: &[f64], from: usize, criteria: WindowCriteria) -> Option<usize> {
    let n = diff.len();
    let persist = criteria.persistence;
    (from..n).find(|&k| {
        diff[k] > criteria.threshold
            && k + persist <= n
            && diff[k..k + persist].iter().all(|&d| d > 0.0)
    })
}

/// True when an onset exists whose excess never returns to zero.
fn open_excess(
    perturbed: &ProbabilitySeries,
    unperturbed: &ProbabilitySeries,
    criteria: WindowCriteria,
) -> bool {
    let diff = excess(perturbed, unperturbed);
    let mut k = 0;
    while let Some(d) = next_onset(&diff, k, criteria) {
        match (d + 1..diff.len()).find(|&j| diff[j] <= 0.0) {
            Some(c) => k = c,
            None => return true,
        }
    }
    false
}

/// Trapezoid integral over `[times[d], times[c-1] + frac·(times[c] − times[c-1])]`.
fn window_integral(times: &[f64], values: &[f64], d: usize, c: usize, frac: f64) -> f64 {
    let mut sum = 0.0;
    for k in d..c - 1 {
        sum += 0.5 * (times[k + 1] - times[k]) * (values[k] + values[k + 1]);
    }
    let h = frac * (times[c] - times[c - 1]);
    let end_value = values[c - 1] + frac * (values[c] - values[c - 1]);
    sum + 0.5 * h * (values[c - 1] + end_value)
}

/// `v_e = D / (t_d − (t_p − ε/2))` with its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalVelocity {
    pub v_e: f64,
    pub distance: f64,
    pub t_d: f64,
    pub t_p: f64,
    pub epsilon: f64,
}

pub fn signal_velocity(
    window: &SuperarrivalWindow,
    schedule: &BarrierSchedule,
    distance: f64,
) -> Result<SignalVelocity> {
    if !(distance > 0.0) {
        return Err(Error::config("d", "must be positive"));
    }
    let reference = schedule.onset - 0.5 * schedule.duration;
    let delay = window.t_d - reference;
    if !(delay > 0.0) {
        return Err(Error::DegenerateTiming(format!(
            "t_d = {} is not later than t_p − ε/2 = {reference}",
            window.t_d
        )));
    }
    Ok(SignalVelocity {
        v_e: distance / delay,
        distance,
        t_d: window.t_d,
        t_p: schedule.onset,
        epsilon: schedule.duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::RampMode;

    fn series(values: Vec<f64>) -> ProbabilitySeries {
        let n = values.len();
        ProbabilitySeries::new(
            DetectorKind::Reflection,
            -0.5,
            (0..n as u64).collect(),
            (0..n).map(|k| k as f64 * 1e-3).collect(),
            values,
        )
        .unwrap()
    }

    fn window_at(t_d: f64) -> SuperarrivalWindow {
        SuperarrivalWindow {
            t_d,
            t_c: t_d + 1e-4,
            delta_t: 1e-4,
            eta: 0.1,
            i_p: 1.1,
            i_s: 1.0,
            onset_index: 0,
            peak_excess: 0.0,
        }
    }

    #[test]
    fn identical_series_have_no_window() {
        let s = series(vec![0.0, 0.1, 0.2, 0.3, 0.4]);
        let out = detect_window(&s, &s, WindowCriteria::default()).unwrap();
        assert_eq!(out, WindowOutcome::NotDetected(NoWindow::NoDeviation));
    }

    #[test]
    fn window_with_interpolated_crossing() {
        let base = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let excess = [0.0, 0.0, 0.01, 0.02, 0.02, 0.01, -0.01, -0.02];
        let pert: Vec<f64> = base.iter().zip(excess).map(|(b, e)| b + e).collect();
        let out = detect_window(
            &series(pert.clone()),
            &series(base.clone()),
            WindowCriteria::default(),
        )
        .unwrap();
        let w = *out.window().unwrap();
        assert_eq!(w.onset_index, 2);
        assert!((w.t_d - 2e-3).abs() < 1e-15);
        // Excess goes 0.01 → −0.01 between samples 5 and 6.
        assert!((w.t_c - 5.5e-3).abs() < 1e-15);
        assert!((w.delta_t - 3.5e-3).abs() < 1e-15);
        // Brute-force trapezoid on a fine linear interpolant.
        let fine = |vals: &[f64]| {
            let m = 35_000;
            let h = (w.t_c - w.t_d) / m as f64;
            let f = |t: f64| {
                let s = t / 1e-3;
                let i = (s.floor() as usize).min(vals.len() - 2);
                let fr = s - i as f64;
                vals[i] * (1.0 - fr) + vals[i + 1] * fr
            };
            (0..m)
                .map(|j| 0.5 * h * (f(w.t_d + j as f64 * h) + f(w.t_d + (j + 1) as f64 * h)))
                .sum::<f64>()
        };
        assert!((w.i_p - fine(&pert)).abs() < 1e-9);
        assert!((w.i_s - fine(&base)).abs() < 1e-9);
        assert_eq!(w.eta, (w.i_p - w.i_s) / w.i_s);
        assert!(w.eta > 0.0);
    }

    #[test]
    fn flicker_below_persistence_is_ignored() {
        let base = vec![0.5; 8];
        let pert = vec![0.5, 0.51, 0.49, 0.51, 0.5, 0.5, 0.5, 0.5];
        let out = detect_window(&series(pert), &series(base), WindowCriteria::default()).unwrap();
        assert_eq!(out, WindowOutcome::NotDetected(NoWindow::NoDeviation));
    }

    #[test]
    fn open_window_reports_no_crossing() {
        let base = vec![0.5; 6];
        let pert = vec![0.5, 0.6, 0.6, 0.6, 0.6, 0.6];
        let out = detect_window(&series(pert), &series(base), WindowCriteria::default()).unwrap();
        assert_eq!(out, WindowOutcome::NotDetected(NoWindow::NoCrossing));
    }

    #[test]
    fn dominant_candidate_is_reported() {
        let base = vec![0.2; 16];
        let excess = [
            0.0, 0.001, 0.002, 0.001, -0.001, 0.0, 0.01, 0.03, 0.05, 0.03, 0.01, -0.01, 0.0, 0.0,
            0.0, 0.0,
        ];
        let pert: Vec<f64> = base.iter().zip(excess).map(|(b, e)| b + e).collect();
        let c = WindowCriteria::default();
        let all = candidate_windows(&series(pert.clone()), &series(base.clone()), c).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].onset_index, 1);
        assert_eq!(all[1].onset_index, 6);
        let w = *detect_window(&series(pert), &series(base), c)
            .unwrap()
            .window()
            .unwrap();
        assert_eq!(w, all[1]);
        assert!(w.t_d > all[0].t_c);
    }

    #[test]
    fn mismatched_time_grids_are_rejected() {
        let a = series(vec![0.0; 4]);
        let mut b = series(vec![0.0; 4]);
        b.times[3] = 1.0;
        assert!(matches!(
            detect_window(&a, &b, WindowCriteria::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn signal_velocity_plug_in() {
        let s = BarrierSchedule::ramped(0.0, 0.016, 1.0, RampMode::Lowering, 8e-4, 2e-5);
        let v = signal_velocity(&window_at(9e-4), &s, 0.5).unwrap();
        assert!((v.v_e - 0.5 / 1.1e-4).abs() < 1e-6);
        assert!((v.v_e - 4545.45).abs() < 0.01);
        assert_eq!(v.t_p, 8e-4);
    }

    #[test]
    fn signal_velocity_degenerate_timing() {
        let s = BarrierSchedule::ramped(0.0, 0.016, 1.0, RampMode::Lowering, 8e-4, 2e-5);
        let err = signal_velocity(&window_at(8e-4 - 1e-5), &s, 0.5).unwrap_err();
        assert!(matches!(err, Error::DegenerateTiming(_)));
        assert!(signal_velocity(&window_at(9e-4), &s, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn bump_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (20usize..60, 0.001f64..0.05, 2usize..8, 4usize..12).prop_map(|(n, amp, start, len)| {
                let base: Vec<f64> = (0..n).map(|k| 0.01 * k as f64 / n as f64 + 0.2).collect();
                let pert = base
                    .iter()
                    .enumerate()
                    .map(|(k, b)| {
                        if k >= start && k < start + len {
                            let s = (k - start + 1) as f64 / (len + 1) as f64;
                            b + amp * (std::f64::consts::PI * s).sin()
                        } else {
                            *b
                        }
                    })
                    .collect();
                (pert, base)
            })
        }

        proptest! {
            #[test]
            fn swapping_series_removes_the_window((pert, base) in bump_pair()) {
                let c = WindowCriteria::default();
                let fwd = detect_window(&series(pert.clone()), &series(base.clone()), c).unwrap();
                prop_assert!(fwd.window().is_some());
                let rev = detect_window(&series(base), &series(pert), c).unwrap();
                prop_assert!(rev.window().is_none());
            }

            #[test]
            fn eta_is_scale_invariant((pert, base) in bump_pair(), factor in 1.0f64..10.0) {
                let c = WindowCriteria::default();
                let w1 = *detect_window(&series(pert.clone()), &series(base.clone()), c)
                    .unwrap().window().unwrap();
                let w2 = *detect_window(&series(pert).scaled(factor), &series(base).scaled(factor), c)
                    .unwrap().window().unwrap();
                prop_assert!((w1.eta - w2.eta).abs() <= 1e-12 * w1.eta.abs().max(1.0));
                prop_assert!((w1.t_c - w2.t_c).abs() <= 1e-15);
            }
        }
    }
}
