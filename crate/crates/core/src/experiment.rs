//! Experiment runners. Each writes its artifacts into the configured output
//! directory and returns the report that `report.json` holds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bohmian::ensemble::Exclusion;
use crate::bohmian::fields::{quantum_potential_frame, quantum_potential_wells};
use crate::bohmian::newton::median;
use crate::bohmian::{
    integrate_ensemble, newton_residual, quantum_potential, sample_initial_positions,
    superarrival_betas, transport_velocity_field, Direction, SampleFlag, SuperarrivalEnsemble,
    TrajectoryEnsemble, VelocityField,
};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::observables::{
    candidate_windows, detect_window, detector_series, signal_velocity, DetectorKind, NoWindow,
    ProbabilitySeries, SignalVelocity, SuperarrivalWindow, WindowOutcome,
};
use crate::output::{
    write_betas, write_json, write_qpotential, write_series, write_trajectories, SCHEMA_VERSION,
};
use crate::potentials::BarrierSchedule;
use crate::solver::{mean_energy, propagate, PropagationRecord, Propagator};
use crate::state::{init_gaussian, interpolate, Grid, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormDrift {
    pub reference: f64,
    pub perturbed: f64,
}

/// Plateau and final values of both detector series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub reference_max: f64,
    pub perturbed_max: f64,
    pub reference_final: f64,
    pub perturbed_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSummary {
    pub n_particles: usize,
    pub kept: usize,
    pub excluded: Vec<Exclusion>,
    pub outside_window: usize,
    pub never_arrived: usize,
    /// `β̃`; absent for an empty ensemble.
    pub beta_mean: Option<f64>,
    pub all_advanced: bool,
    pub non_positive: usize,
    pub node_degenerate: usize,
    pub hit_wall: usize,
}

impl BetaSummary {
    fn of(e: &SuperarrivalEnsemble) -> Self {
        let (node_degenerate, hit_wall) = e.perturbed.halted();
        BetaSummary {
            n_particles: e.n,
            kept: e.kept.len(),
            excluded: e.excluded.clone(),
            outside_window: e.outside_window,
            never_arrived: e.never_arrived,
            beta_mean: e.beta_mean,
            all_advanced: e.all_advanced,
            non_positive: e.negative_betas(),
            node_degenerate,
            hit_wall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsProbe {
    pub step: u64,
    pub reference: f64,
    pub perturbed: f64,
}

/// Ordering, equivariance and force-law checks on full ensembles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencySummary {
    pub n_particles: usize,
    pub crossings_reference: usize,
    pub crossings_perturbed: usize,
    pub halted_reference: usize,
    pub halted_perturbed: usize,
    pub ks: Vec<KsProbe>,
    pub newton_median_reference: Option<f64>,
    pub newton_median_perturbed: Option<f64>,
    /// Share of interior samples whose force is resolved by the path cadence.
    pub newton_resolved_reference: f64,
    pub newton_resolved_perturbed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QSnapshot {
    pub step: u64,
    pub t: f64,
    pub file: String,
    /// `Q` interpolated at the initial packet center.
    pub q_at_x0: f64,
    /// Local minima of `Q` left of the barrier, on unmasked sites.
    pub wells: Vec<f64>,
    pub leftmost_well: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Mean energy `⟨H⟩` of the initial packet without potential.
    pub energy: f64,
    pub v0: f64,
    pub epsilon: f64,
    pub detector: Option<DetectorKind>,
    pub detector_position: Option<f64>,
    pub norm_drift: Option<NormDrift>,
    pub window: Option<SuperarrivalWindow>,
    pub no_window: Option<NoWindow>,
    pub candidate_windows: Vec<SuperarrivalWindow>,
    pub signal_velocity: Option<SignalVelocity>,
    pub signal_velocity_error: Option<String>,
    pub series: Option<SeriesSummary>,
    pub beta: Option<BetaSummary>,
    pub consistency: Option<ConsistencySummary>,
    pub qpotential: Vec<QSnapshot>,
    pub files: Vec<String>,
    pub elapsed_seconds: f64,
}

impl RunReport {
    fn new(config: &ExperimentConfig, energy: f64, v0: f64, epsilon: f64) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            kind: config.kind,
            config: config.clone(),
            energy,
            v0,
            epsilon,
            detector: None,
            detector_position: None,
            norm_drift: None,
            window: None,
            no_window: None,
            candidate_windows: Vec::new(),
            signal_velocity: None,
            signal_velocity_error: None,
            series: None,
            beta: None,
            consistency: None,
            qpotential: Vec::new(),
            files: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    /// One-line outcome for the terminal.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        match (&self.window, self.no_window) {
            (Some(w), _) => parts.push(format!(
                "window t_d = {:.6e}, t_c = {:.6e}, eta = {:.6}",
                w.t_d, w.t_c, w.eta
            )),
            (None, Some(_)) => parts.push("no superarrival detected".to_string()),
            (None, None) => {}
        }
        if let Some(v) = &self.signal_velocity {
            parts.push(format!("v_e = {:.6}", v.v_e));
        }
        if let Some(b) = &self.beta {
            parts.push(match b.beta_mean {
                Some(m) => format!("beta_mean = {m:.6e} over {} particles", b.kept),
                None => "empty superarrival ensemble".to_string(),
            });
        }
        if let Some(c) = &self.consistency {
            parts.push(format!(
                "crossings {}/{}, newton median {}/{}",
                c.crossings_reference,
                c.crossings_perturbed,
                fmt_opt(c.newton_median_reference),
                fmt_opt(c.newton_median_perturbed)
            ));
        }
        for q in &self.qpotential {
            match q.leftmost_well {
                Some(x) => parts.push(format!("well@{} = {x:.6}", q.step)),
                None => parts.push(format!("no well@{}", q.step)),
            }
        }
        format!("{}: {}", self.kind, parts.join(", "))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"))
}

/// Initial state and the derived barrier height shared by paired runs.
struct Setup {
    grid: Grid,
    psi0: WaveFunction,
    energy: f64,
    v0: f64,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let psi0 = init_gaussian(&grid, &config.packet())?;
        let energy = mean_energy(&psi0, &vec![0.0; grid.n_points()]);
        let v0 = config.v0.unwrap_or(config.v0_over_e * energy);
        Ok(Setup {
            grid,
            psi0,
            energy,
            v0,
        })
    }

    fn run(
        &self,
        config: &ExperimentConfig,
        schedule: &BarrierSchedule,
    ) -> Result<PropagationRecord> {
        propagate(&self.psi0, schedule, config.n_steps, 1)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn file_name(dir: &Path, root: &Path, name: &str) -> (PathBuf, String) {
    let path = dir.join(name);
    let rel = path
        .strip_prefix(root)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| path.display().to_string());
    (path, rel)
}

fn series_summary(reference: &ProbabilitySeries, perturbed: &ProbabilitySeries) -> SeriesSummary {
    SeriesSummary {
        reference_max: reference.max_value(),
        perturbed_max: perturbed.max_value(),
        reference_final: reference.last_value().unwrap_or(f64::NAN),
        perturbed_final: perturbed.last_value().unwrap_or(f64::NAN),
    }
}

fn record_window(
    report: &mut RunReport,
    config: &ExperimentConfig,
    reference: &ProbabilitySeries,
    perturbed: &ProbabilitySeries,
    schedule: &BarrierSchedule,
) -> Result<()> {
    report.candidate_windows = candidate_windows(perturbed, reference, config.criteria())?;
    match detect_window(perturbed, reference, config.criteria())? {
        WindowOutcome::Detected(w) => {
            report.window = Some(w);
            match signal_velocity(&w, schedule, config.d) {
                Ok(v) => report.signal_velocity = Some(v),
                Err(e @ Error::DegenerateTiming(_)) => {
                    report.signal_velocity_error = Some(e.to_string())
                }
                Err(e) => return Err(e),
            }
        }
        WindowOutcome::NotDetected(reason) => report.no_window = Some(reason),
    }
    Ok(())
}

/// `Q` rows at the requested steps of a record.
fn q_snapshots(
    config: &ExperimentConfig,
    record: &PropagationRecord,
    dir: &Path,
    root: &Path,
    files: &mut Vec<String>,
) -> Result<Vec<QSnapshot>> {
    let grid = &record.grid;
    let barrier_left = config.x_c - 0.5 * config.w;
    config
        .snapshot_steps
        .iter()
        .map(|&step| {
            let k = record.frame_at_step(step).ok_or_else(|| {
                Error::argument(format!(
                    "snapshot step {step} is outside the propagation span"
                ))
            })?;
            snapshot(
                config,
                grid,
                &record.frames[k],
                step,
                barrier_left,
                dir,
                root,
                files,
            )
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn snapshot(
    config: &ExperimentConfig,
    grid: &Grid,
    frame: &[num_complex::Complex64],
    step: u64,
    barrier_left: f64,
    dir: &Path,
    root: &Path,
    files: &mut Vec<String>,
) -> Result<QSnapshot> {
    let (q, mask) = quantum_potential_frame(grid, frame, config.node_floor);
    let density = crate::state::density_of(frame);
    let wells = quantum_potential_wells(
        grid,
        &q,
        &density,
        grid.x_min(),
        barrier_left.next_down(),
        config.node_floor,
    );
    let (path, rel) = file_name(dir, root, &format!("qpotential_step{step}.csv"));
    write_qpotential(&path, grid, &q, &mask)?;
    files.push(rel.clone());
    Ok(QSnapshot {
        step,
        t: grid.time_of(step),
        file: rel,
        q_at_x0: interpolate(grid, &q, config.x0),
        leftmost_well: wells.first().copied(),
        wells,
    })
}

/// Static reference of a reflection experiment, shared across ε values.
struct ReflectionReference {
    setup: Setup,
    record: PropagationRecord,
    series: ProbabilitySeries,
    field: VelocityField,
    positions: Vec<f64>,
}

impl ReflectionReference {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let setup = Setup::new(config)?;
        let schedule = BarrierSchedule::fixed(config.x_c, config.w, setup.v0);
        let record = setup.run(config, &schedule)?;
        let series = detector_series(&record, DetectorKind::Reflection, config.x_prime)?;
        let field = transport_velocity_field(&record, config.node_floor)?;
        let positions = sample_initial_positions(
            &config.packet(),
            config.n_particles,
            config.sampling,
            config.seed,
            &setup.grid,
        )?;
        Ok(ReflectionReference {
            setup,
            record,
            series,
            field,
            positions,
        })
    }
}

/// Which trajectories go into the CSV files and whether the full
/// consistency suite runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Depth {
    /// Kept superarrival particles only.
    Superarrivals,
    /// Every particle under both fields, plus ordering/equivariance/force checks.
    Full,
}

fn perturbed_reflection(
    config: &ExperimentConfig,
    reference: &ReflectionReference,
    epsilon: f64,
    dir: &Path,
    root: &Path,
    depth: Depth,
) -> Result<RunReport> {
    let start = Instant::now();
    ensure_dir(dir)?;
    let setup = &reference.setup;
    let mut report = RunReport::new(config, setup.energy, setup.v0, epsilon);
    report.detector = Some(DetectorKind::Reflection);
    report.detector_position = Some(config.x_prime);
    let schedule = config.schedule(setup.v0, epsilon);
    let record = setup.run(config, &schedule)?;
    let series = detector_series(&record, DetectorKind::Reflection, config.x_prime)?;
    report.norm_drift = Some(NormDrift {
        reference: reference.record.norm_drift,
        perturbed: record.norm_drift,
    });
    for (name, s) in [
        ("series_static.csv", &reference.series),
        ("series_perturbed.csv", &series),
    ] {
        let (path, rel) = file_name(dir, root, name);
        write_series(&path, s)?;
        report.files.push(rel);
    }
    report.series = Some(series_summary(&reference.series, &series));
    record_window(&mut report, config, &reference.series, &series, &schedule)?;
    report.qpotential = q_snapshots(config, &record, dir, root, &mut report.files)?;

    let field = transport_velocity_field(&record, config.node_floor)?;
    if let Some(window) = report.window {
        let ensemble = superarrival_betas(
            &reference.field,
            &field,
            &window,
            &reference.positions,
            config.x_prime,
            Direction::Leftward,
        )?;
        let (path, rel) = file_name(dir, root, "betas.csv");
        write_betas(&path, &ensemble.kept)?;
        report.files.push(rel);
        report.beta = Some(BetaSummary::of(&ensemble));
        if depth == Depth::Superarrivals {
            let kept: Vec<usize> = ensemble.kept.iter().map(|b| b.particle).collect();
            let static_paths = ensemble
                .static_paths
                .iter()
                .filter(|(j, _)| kept.contains(j))
                .map(|(j, p)| (*j, p));
            let perturbed_paths = kept.iter().map(|&j| (j, &ensemble.perturbed.paths[j]));
            let (path, rel) = file_name(dir, root, "trajectories_static.csv");
            write_trajectories(&path, static_paths, config.trajectory_stride)?;
            report.files.push(rel);
            let (path, rel) = file_name(dir, root, "trajectories_perturbed.csv");
            write_trajectories(&path, perturbed_paths, config.trajectory_stride)?;
            report.files.push(rel);
        }
        if depth == Depth::Full {
            let summary = consistency(
                config,
                reference,
                &record,
                &ensemble.perturbed,
                dir,
                root,
                &mut report.files,
            )?;
            report.consistency = Some(summary);
        }
    } else if depth == Depth::Full {
        let perturbed = integrate_ensemble(&field, &reference.positions)?;
        let summary = consistency(
            config,
            reference,
            &record,
            &perturbed,
            dir,
            root,
            &mut report.files,
        )?;
        report.consistency = Some(summary);
    }
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Pooled median residual over resolved samples, and the resolved share.
fn pooled_newton_median(
    config: &ExperimentConfig,
    record: &PropagationRecord,
    ensemble: &TrajectoryEnsemble,
) -> Result<(Option<f64>, f64)> {
    let q = quantum_potential(record, config.node_floor)?;
    let mut all = Vec::new();
    let mut interior = 0usize;
    for p in &ensemble.paths {
        let r = newton_residual(&q, p, &record.schedule)?;
        interior += r
            .flags
            .iter()
            .filter(|f| **f != SampleFlag::Endpoint)
            .count();
        all.extend(r.valid());
    }
    let share = if interior == 0 {
        0.0
    } else {
        all.len() as f64 / interior as f64
    };
    Ok((median(all), share))
}

#[allow(clippy::too_many_arguments)]
fn consistency(
    config: &ExperimentConfig,
    reference: &ReflectionReference,
    record: &PropagationRecord,
    perturbed: &TrajectoryEnsemble,
    dir: &Path,
    root: &Path,
    files: &mut Vec<String>,
) -> Result<ConsistencySummary> {
    let grid = &reference.setup.grid;
    let base = integrate_ensemble(&reference.field, &reference.positions)?;
    let n = config.n_steps;
    let probes = [n / 4, n / 2, n];
    let ks = probes
        .iter()
        .map(|&step| {
            let k = record.frame_at_step(step).expect("every step is recorded");
            KsProbe {
                step,
                reference: base.ks_distance(grid, &reference.record.frame_density(k), k),
                perturbed: perturbed.ks_distance(grid, &record.frame_density(k), k),
            }
        })
        .collect();
    let halted = |e: &TrajectoryEnsemble| {
        let (a, b) = e.halted();
        a + b
    };
    let newton_ref = pooled_newton_median(config, &reference.record, &base)?;
    let newton_pert = pooled_newton_median(config, record, perturbed)?;
    let summary = ConsistencySummary {
        n_particles: base.len(),
        crossings_reference: base.crossing_violations().len(),
        crossings_perturbed: perturbed.crossing_violations().len(),
        halted_reference: halted(&base),
        halted_perturbed: halted(perturbed),
        ks,
        newton_median_reference: newton_ref.0,
        newton_median_perturbed: newton_pert.0,
        newton_resolved_reference: newton_ref.1,
        newton_resolved_perturbed: newton_pert.1,
    };
    for (name, e) in [
        ("trajectories_static.csv", &base),
        ("trajectories_perturbed.csv", perturbed),
    ] {
        let (path, rel) = file_name(dir, root, name);
        write_trajectories(&path, e.paths.iter().enumerate(), config.trajectory_stride)?;
        files.push(rel);
    }
    Ok(summary)
}

fn finish(report: &RunReport, dir: &Path) -> Result<()> {
    write_json(&dir.join("report.json"), report)
}

/// Static versus lowered barrier, reflection detector at `x′`.
pub fn run_reflection_lowering(config: &ExperimentConfig) -> Result<RunReport> {
    reflection(config, Depth::Superarrivals)
}

/// The reflection experiment with every trajectory kept and the ordering,
/// equivariance and force-law checks applied to both ensembles.
pub fn run_trajectories(config: &ExperimentConfig) -> Result<RunReport> {
    reflection(config, Depth::Full)
}

fn reflection(config: &ExperimentConfig, depth: Depth) -> Result<RunReport> {
    let start = Instant::now();
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    let reference = ReflectionReference::new(config)?;
    let mut report = perturbed_reflection(config, &reference, config.epsilon, dir, dir, depth)?;
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    finish(&report, dir)?;
    Ok(report)
}

/// Free propagation versus a raised barrier, transmission detector at `x″`.
pub fn run_transmission_raising(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    let setup = Setup::new(config)?;
    let mut report = RunReport::new(config, setup.energy, setup.v0, config.epsilon);
    report.detector = Some(DetectorKind::Transmission);
    report.detector_position = Some(config.x_double_prime);
    let free = BarrierSchedule::fixed(config.x_c, config.w, 0.0);
    let schedule = config.schedule(setup.v0, config.epsilon);
    let (reference, perturbed) =
        rayon::join(|| setup.run(config, &free), || setup.run(config, &schedule));
    let (reference, perturbed) = (reference?, perturbed?);
    let rs = detector_series(
        &reference,
        DetectorKind::Transmission,
        config.x_double_prime,
    )?;
    let ps = detector_series(
        &perturbed,
        DetectorKind::Transmission,
        config.x_double_prime,
    )?;
    report.norm_drift = Some(NormDrift {
        reference: reference.norm_drift,
        perturbed: perturbed.norm_drift,
    });
    for (name, s) in [("series_static.csv", &rs), ("series_perturbed.csv", &ps)] {
        let (path, rel) = file_name(dir, dir, name);
        write_series(&path, s)?;
        report.files.push(rel);
    }
    report.series = Some(series_summary(&rs, &ps));
    record_window(&mut report, config, &rs, &ps, &schedule)?;
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    finish(&report, dir)?;
    Ok(report)
}

/// `Q(x)` of the perturbed run at `snapshot_steps`.
pub fn run_qpotential_snapshots(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let dir = &config.output_dir;
    if let Some(&s) = config.snapshot_steps.iter().find(|&&s| s > config.n_steps) {
        return Err(Error::argument(format!(
            "snapshot step {s} is outside the propagation span of {} steps",
            config.n_steps
        )));
    }
    ensure_dir(dir)?;
    let setup = Setup::new(config)?;
    let mut report = RunReport::new(config, setup.energy, setup.v0, config.epsilon);
    let schedule = config.schedule(setup.v0, config.epsilon);
    let mut wanted = config.snapshot_steps.clone();
    wanted.sort_unstable();
    wanted.dedup();
    let mut stepper = Propagator::new(&setup.grid, schedule)?;
    let mut psi = setup.psi0.clone();
    let barrier_left = config.x_c - 0.5 * config.w;
    let mut snaps = Vec::with_capacity(wanted.len());
    for &step in &wanted {
        while psi.step() < step {
            stepper.step(&mut psi)?;
        }
        snaps.push(snapshot(
            config,
            &setup.grid,
            psi.amplitudes(),
            step,
            barrier_left,
            dir,
            dir,
            &mut report.files,
        )?);
    }
    // Report in the requested order.
    report.qpotential = config
        .snapshot_steps
        .iter()
        .map(|s| {
            snaps
                .iter()
                .find(|q| q.step == *s)
                .cloned()
                .expect("computed above")
        })
        .collect();
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    finish(&report, dir)?;
    Ok(report)
}

/// One row of a sweep; `error` is set when that ε failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub epsilon_steps: f64,
    pub directory: String,
    pub eta: Option<f64>,
    pub v_e: Option<f64>,
    pub beta_mean: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub energy: f64,
    pub v0: f64,
    pub rows: Vec<SweepRow>,
    pub files: Vec<String>,
    pub elapsed_seconds: f64,
}

impl SweepReport {
    pub fn summary(&self) -> String {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| match &r.error {
                Some(e) => format!("eps {} steps: failed ({e})", r.epsilon_steps),
                None => format!(
                    "eps {} steps: eta {} v_e {} beta_mean {}",
                    r.epsilon_steps,
                    opt(r.eta),
                    opt(r.v_e),
                    opt(r.beta_mean)
                ),
            })
            .collect();
        format!("sweep: {}", rows.join("; "))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

/// The reflection pipeline for every ε in `config.epsilons`, sharing one
/// static reference run. Each ε writes into its own subdirectory.
pub fn run_epsilon_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    let start = Instant::now();
    if config.epsilons.len() < 2 {
        return Err(Error::argument(
            "an epsilon sweep needs at least two values",
        ));
    }
    let root = &config.output_dir;
    ensure_dir(root)?;
    let reference = ReflectionReference::new(config)?;
    let rows: Vec<SweepRow> = config
        .epsilons
        .par_iter()
        .map(|&epsilon| {
            let steps = config.steps_of(epsilon);
            let name = format!("eps_{}", format_steps(steps));
            let dir = root.join(&name);
            let mut sub = config.clone();
            sub.epsilon = epsilon;
            sub.output_dir = dir.clone();
            let outcome =
                perturbed_reflection(&sub, &reference, epsilon, &dir, &dir, Depth::Superarrivals)
                    .and_then(|r| finish(&r, &dir).map(|_| r));
            match outcome {
                Ok(r) => SweepRow {
                    epsilon,
                    epsilon_steps: steps,
                    directory: name,
                    eta: r.window.map(|w| w.eta),
                    v_e: r.signal_velocity.map(|v| v.v_e),
                    beta_mean: r.beta.as_ref().and_then(|b| b.beta_mean),
                    error: None,
                },
                Err(e) => SweepRow {
                    epsilon,
                    epsilon_steps: steps,
                    directory: name,
                    eta: None,
                    v_e: None,
                    beta_mean: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut report = SweepReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        energy: reference.setup.energy,
        v0: reference.setup.v0,
        rows,
        files: Vec::new(),
        elapsed_seconds: 0.0,
    };
    write_sweep_csv(&root.join("sweep.csv"), &report.rows)?;
    report.files.push("sweep.csv".to_string());
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    write_json(&root.join("report.json"), &report)?;
    Ok(report)
}

fn format_steps(steps: f64) -> String {
    let r = steps.round();
    if (steps - r).abs() < 1e-6 {
        format!("{}", r as i64)
    } else {
        format!("{steps:.3}")
    }
}

/// `epsilon,epsilon_steps,eta,v_e,beta_mean`; missing values are empty.
fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epsilon,epsilon_steps,eta,v_e,beta_mean")?;
    let cell = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.16e}"));
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{},{},{}",
            r.epsilon,
            r.epsilon_steps,
            cell(r.eta),
            cell(r.v_e),
            cell(r.beta_mean)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of [`run`], whichever experiment it was.
#[derive(Debug, Clone)]
pub enum Outcome {
    Run(Box<RunReport>),
    Sweep(Box<SweepReport>),
}

impl Outcome {
    pub fn summary(&self) -> String {
        match self {
            Outcome::Run(r) => r.summary(),
            Outcome::Sweep(s) => s.summary(),
        }
    }
}

/// Dispatches on `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    Ok(match config.kind {
        ExperimentKind::ReflectionLowering => {
            Outcome::Run(Box::new(run_reflection_lowering(config)?))
        }
        ExperimentKind::TransmissionRaising => {
            Outcome::Run(Box::new(run_transmission_raising(config)?))
        }
        ExperimentKind::Trajectories => Outcome::Run(Box::new(run_trajectories(config)?)),
        ExperimentKind::Qpotential => Outcome::Run(Box::new(run_qpotential_snapshots(config)?)),
        ExperimentKind::Sweep => Outcome::Sweep(Box::new(run_epsilon_sweep(config)?)),
    })
}
