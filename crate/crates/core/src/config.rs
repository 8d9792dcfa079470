//! Experiment configuration: `key = value` files, flag overrides, defaults
//! and cross-field validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::bohmian::{SamplingScheme, DEFAULT_NODE_FLOOR};
use crate::error::{Error, Result};
use crate::observables::WindowCriteria;
use crate::potentials::{BarrierSchedule, RampMode};
use crate::state::{GaussianPacketSpec, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ReflectionLowering,
    TransmissionRaising,
    Trajectories,
    Qpotential,
    Sweep,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::ReflectionLowering => "reflection-lowering",
            ExperimentKind::TransmissionRaising => "transmission-raising",
            ExperimentKind::Trajectories => "trajectories",
            ExperimentKind::Qpotential => "qpotential",
            ExperimentKind::Sweep => "sweep",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "reflection-lowering" => ExperimentKind::ReflectionLowering,
            "transmission-raising" => ExperimentKind::TransmissionRaising,
            "trajectories" => ExperimentKind::Trajectories,
            "qpotential" => ExperimentKind::Qpotential,
            "sweep" => ExperimentKind::Sweep,
            other => {
                return Err(Error::config(
                    "kind",
                    format!(
                        "unknown experiment `{other}` \
                         (reflection-lowering|transmission-raising|trajectories|qpotential|sweep)"
                    ),
                ))
            }
        })
    }
}

/// Every recognized key, in the order they are documented.
pub const KEYS: &[&str] = &[
    "kind",
    "output_dir",
    "x_min",
    "x_max",
    "n_points",
    "dt",
    "n_steps",
    "x0",
    "sigma",
    "k0",
    "mode",
    "x_c",
    "w",
    "v0",
    "v0_over_e",
    "t_p",
    "epsilon",
    "epsilons",
    "x_prime",
    "x_double_prime",
    "threshold",
    "persistence",
    "node_floor",
    "n_particles",
    "sampling",
    "seed",
    "d",
    "snapshot_steps",
    "trajectory_stride",
];

/// Fully resolved configuration. Times are in physical units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
    pub n_steps: u64,
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub mode: RampMode,
    pub x_c: f64,
    pub w: f64,
    /// Explicit barrier height; when absent the height is `v0_over_e · E`.
    pub v0: Option<f64>,
    pub v0_over_e: f64,
    pub t_p: f64,
    pub epsilon: f64,
    /// Ramp durations of a sweep.
    pub epsilons: Vec<f64>,
    pub x_prime: f64,
    pub x_double_prime: f64,
    pub threshold: f64,
    pub persistence: usize,
    pub node_floor: f64,
    pub n_particles: usize,
    pub sampling: SamplingScheme,
    pub seed: u64,
    /// Distance used for the signal velocity.
    pub d: f64,
    pub snapshot_steps: Vec<u64>,
    /// Step stride of the trajectory CSV files.
    pub trajectory_stride: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dt = 2e-6;
        ExperimentConfig {
            kind: ExperimentKind::ReflectionLowering,
            output_dir: PathBuf::from("out"),
            x_min: -1.0,
            x_max: 1.0,
            n_points: 8193,
            dt,
            n_steps: 2000,
            x0: -0.3,
            sigma: 0.05 / 2f64.sqrt(),
            k0: 187.5,
            mode: RampMode::Lowering,
            x_c: 0.0,
            w: 0.016,
            v0: None,
            v0_over_e: 2.0,
            t_p: 400.0 * dt,
            epsilon: 10.0 * dt,
            epsilons: [5.0, 10.0, 20.0, 40.0].iter().map(|s| s * dt).collect(),
            x_prime: -0.5,
            x_double_prime: 0.5,
            threshold: 1e-4,
            persistence: 3,
            node_floor: DEFAULT_NODE_FLOOR,
            n_particles: 1000,
            sampling: SamplingScheme::Quantile,
            seed: 0,
            d: 0.5,
            snapshot_steps: vec![420, 425, 430],
            trajectory_stride: 10,
        }
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", n + 1),
                format!("expected `key = value`, found `{line}`"),
            ));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// A time given either in physical units (`8e-4`) or in steps (`400 steps`).
pub fn parse_time(field: &str, value: &str, dt: f64) -> Result<f64> {
    let v = value.trim();
    let (number, in_steps) = match v.strip_suffix("steps").or_else(|| v.strip_suffix("step")) {
        Some(n) => (n.trim(), true),
        None => (v, false),
    };
    let x: f64 = number
        .parse()
        .map_err(|_| Error::config(field, format!("`{value}` is not a time")))?;
    Ok(if in_steps { x * dt } else { x })
}

/// Comma-separated times. `5, 10, 20 steps` reads as all in steps: when only
/// the last entry names a unit, the unit applies to every entry.
pub fn parse_time_list(field: &str, value: &str, dt: f64) -> Result<Vec<f64>> {
    let entries: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let has_unit = |s: &str| s.ends_with("step") || s.ends_with("steps");
    let shorthand = entries.len() > 1
        && entries.last().is_some_and(|s| has_unit(s))
        && entries[..entries.len() - 1].iter().all(|s| !has_unit(s));
    entries
        .iter()
        .map(|s| {
            if shorthand && !has_unit(s) {
                parse_time(field, &format!("{s} steps"), dt)
            } else {
                parse_time(field, s, dt)
            }
        })
        .collect()
}

fn parse_num<T: FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{value}`")))
}

fn parse_steps(field: &str, value: &str) -> Result<u64> {
    let v = value.trim();
    let v = v.strip_suffix("steps").unwrap_or(v).trim();
    parse_num(field, v)
}

impl ExperimentConfig {
    /// Builds a configuration from raw key/value pairs over the defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::config(key.as_str(), "unknown key"));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        if let Some(v) = get("kind") {
            c.kind = v.parse()?;
        }
        c.mode = match c.kind {
            ExperimentKind::TransmissionRaising => RampMode::Raising,
            _ => RampMode::Lowering,
        };
        if let Some(v) = get("dt") {
            c.dt = parse_num("dt", v)?;
            if !(c.dt > 0.0) || !c.dt.is_finite() {
                return Err(Error::config("dt", "must be positive"));
            }
            let d = ExperimentConfig::default();
            c.t_p = d.t_p / d.dt * c.dt;
            c.epsilon = d.epsilon / d.dt * c.dt;
            c.epsilons = d.epsilons.iter().map(|e| e / d.dt * c.dt).collect();
        }
        let dt = c.dt;
        for (key, value) in map {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "kind" | "dt" => {}
                "output_dir" => c.output_dir = PathBuf::from(v),
                "x_min" => c.x_min = parse_num(k, v)?,
                "x_max" => c.x_max = parse_num(k, v)?,
                "n_points" => c.n_points = parse_num(k, v)?,
                "n_steps" => c.n_steps = parse_steps(k, v)?,
                "x0" => c.x0 = parse_num(k, v)?,
                "sigma" => c.sigma = parse_num(k, v)?,
                "k0" => c.k0 = parse_num(k, v)?,
                "mode" => c.mode = v.parse()?,
                "x_c" => c.x_c = parse_num(k, v)?,
                "w" => c.w = parse_num(k, v)?,
                "v0" => c.v0 = Some(parse_num(k, v)?),
                "v0_over_e" => c.v0_over_e = parse_num(k, v)?,
                "t_p" => c.t_p = parse_time(k, v, dt)?,
                "epsilon" => c.epsilon = parse_time(k, v, dt)?,
                "epsilons" => c.epsilons = parse_time_list(k, v, dt)?,
                "x_prime" => c.x_prime = parse_num(k, v)?,
                "x_double_prime" => c.x_double_prime = parse_num(k, v)?,
                "threshold" => c.threshold = parse_num(k, v)?,
                "persistence" => c.persistence = parse_num(k, v)?,
                "node_floor" => c.node_floor = parse_num(k, v)?,
                "n_particles" => c.n_particles = parse_num(k, v)?,
                "sampling" => c.sampling = v.parse()?,
                "seed" => c.seed = parse_num(k, v)?,
                "d" => c.d = parse_num(k, v)?,
                "snapshot_steps" => {
                    c.snapshot_steps = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_steps(k, s))
                        .collect::<Result<_>>()?
                }
                "trajectory_stride" => c.trajectory_stride = parse_steps(k, v)?,
                _ => unreachable!("key list checked above"),
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads `path` (if any) and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = match path {
            Some(p) => parse_key_values(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x_min, self.x_max, self.n_points, self.dt)
    }

    pub fn packet(&self) -> GaussianPacketSpec {
        GaussianPacketSpec {
            x0: self.x0,
            sigma: self.sigma,
            k0: self.k0,
        }
    }

    pub fn criteria(&self) -> WindowCriteria {
        WindowCriteria {
            threshold: self.threshold,
            persistence: self.persistence,
        }
    }

    /// Barrier of the perturbed run with reference height `v0`.
    pub fn schedule(&self, v0: f64, epsilon: f64) -> BarrierSchedule {
        BarrierSchedule::ramped(self.x_c, self.w, v0, self.mode, self.t_p, epsilon)
    }

    pub fn steps_of(&self, t: f64) -> f64 {
        t / self.dt
    }

    /// Checks every cross-field constraint before any computation.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        self.packet().validate(&grid)?;
        if let Some(v0) = self.v0 {
            if !(v0 >= 0.0) || !v0.is_finite() {
                return Err(Error::config("v0", "barrier height must be non-negative"));
            }
        }
        if !(self.v0_over_e >= 0.0) || !self.v0_over_e.is_finite() {
            return Err(Error::config("v0_over_e", "must be non-negative"));
        }
        if self.kind == ExperimentKind::Sweep {
            if self.epsilons.len() < 2 {
                return Err(Error::config(
                    "epsilons",
                    "a sweep needs at least two values",
                ));
            }
            for &e in &self.epsilons {
                self.schedule(1.0, e).validate(&grid)?;
            }
        }
        self.schedule(1.0, self.epsilon).validate(&grid)?;
        let barrier = self.schedule(1.0, self.epsilon);
        if !grid.strictly_inside(self.x_prime) || self.x_prime >= barrier.left_edge() {
            return Err(Error::config(
                "x_prime",
                "reflection detector must lie inside the grid, left of the barrier",
            ));
        }
        if !grid.strictly_inside(self.x_double_prime) || self.x_double_prime <= barrier.right_edge()
        {
            return Err(Error::config(
                "x_double_prime",
                "transmission detector must lie inside the grid, right of the barrier",
            ));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::config("threshold", "must be positive"));
        }
        if self.persistence == 0 {
            return Err(Error::config("persistence", "must be at least 1"));
        }
        if !(self.node_floor > 0.0) {
            return Err(Error::config("node_floor", "must be positive"));
        }
        if self.n_particles == 0 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::config("d", "must be positive"));
        }
        if self.trajectory_stride == 0 {
            return Err(Error::config("trajectory_stride", "must be at least 1"));
        }
        if let Some(&s) = self.snapshot_steps.iter().find(|&&s| s > self.n_steps) {
            return Err(Error::config(
                "snapshot_steps",
                format!("step {s} lies beyond n_steps = {}", self.n_steps),
            ));
        }
        Ok(())
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn to_key_values(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut lines = vec![
            format!("kind = {}", self.kind),
            format!("output_dir = {}", self.output_dir.display()),
            format!("x_min = {:e}", self.x_min),
            format!("x_max = {:e}", self.x_max),
            format!("n_points = {}", self.n_points),
            format!("dt = {:e}", self.dt),
            format!("n_steps = {}", self.n_steps),
            format!("x0 = {:e}", self.x0),
            format!("sigma = {:e}", self.sigma),
            format!("k0 = {:e}", self.k0),
            format!("mode = {}", self.mode),
            format!("x_c = {:e}", self.x_c),
            format!("w = {:e}", self.w),
        ];
        if let Some(v0) = self.v0 {
            lines.push(format!("v0 = {v0:e}"));
        }
        lines.extend([
            format!("v0_over_e = {:e}", self.v0_over_e),
            format!("t_p = {:e}", self.t_p),
            format!("epsilon = {:e}", self.epsilon),
            format!("epsilons = {}", list(&self.epsilons)),
            format!("x_prime = {:e}", self.x_prime),
            format!("x_double_prime = {:e}", self.x_double_prime),
            format!("threshold = {:e}", self.threshold),
            format!("persistence = {}", self.persistence),
            format!("node_floor = {:e}", self.node_floor),
            format!("n_particles = {}", self.n_particles),
            format!("sampling = {}", self.sampling),
            format!("seed = {}", self.seed),
            format!("d = {:e}", self.d),
            format!(
                "snapshot_steps = {}",
                self.snapshot_steps
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            format!("trajectory_stride = {}", self.trajectory_stride),
        ]);
        lines.join("\n") + "\n"
    }
}
