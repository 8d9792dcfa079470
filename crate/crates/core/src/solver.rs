//! Cayley-form (Crank–Nicolson) propagation of the 1D Schrödinger equation
//!
//! `(1 + i dt H/2ħ) ψ_{n+1} = (1 − i dt H/2ħ) ψ_n` with
//! `H = −(ħ²/2m) ∂²/∂x² + V(x, t_n + dt/2)`, three-point Laplacian and
//! Dirichlet walls. Each step is one O(n) tridiagonal solve.

use std::ops::RangeInclusive;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potentials::BarrierSchedule;
use crate::state::{total_integral, Grid, WaveFunction};
use crate::tridiag;
use crate::units::{HBAR, KINETIC};

/// Reusable stepper for one grid and schedule.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid,
    schedule: BarrierSchedule,
    support: Option<RangeInclusive<usize>>,
    /// `dt·κ/(2ħ dx²)`
    alpha: f64,
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
    rhs: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: &Grid, schedule: BarrierSchedule) -> Result<Self> {
        let support = schedule.support(grid)?;
        let m = grid.n_points() - 2;
        let alpha = grid.dt() * KINETIC / (2.0 * HBAR * grid.dx() * grid.dx());
        let off = Complex64::new(0.0, -alpha);
        Ok(Propagator {
            grid: *grid,
            schedule,
            support,
            alpha,
            lower: vec![off; m],
            diag: vec![Complex64::new(0.0, 0.0); m],
            upper: vec![off; m],
            rhs: vec![Complex64::new(0.0, 0.0); m],
            scratch: vec![Complex64::new(0.0, 0.0); m],
        })
    }

    pub fn schedule(&self) -> &BarrierSchedule {
        &self.schedule
    }

    /// Barrier height applied during the step that starts at `step`.
    pub fn midpoint_height(&self, step: u64) -> f64 {
        let t_mid = (step as f64 + 0.5) * self.grid.dt();
        self.schedule.height_at(t_mid)
    }

    /// Advances `psi` by one time step.
    pub fn step(&mut self, psi: &mut WaveFunction) -> Result<()> {
        if *psi.grid() != self.grid {
            return Err(Error::argument(
                "wavefunction grid differs from propagator grid",
            ));
        }
        let height = self.midpoint_height(psi.step());
        let dt = self.grid.dt();
        let alpha = self.alpha;
        let base = 2.0 * alpha;
        let barrier_beta = dt * height / (2.0 * HBAR);
        let support = self.support.clone();
        let in_barrier = |site: usize| support.as_ref().is_some_and(|r| r.contains(&site));

        let amps = psi.amplitudes();
        let n = amps.len();
        for i in 1..n - 1 {
            let beta = if in_barrier(i) {
                base + barrier_beta
            } else {
                base
            };
            let j = i - 1;
            self.diag[j] = Complex64::new(1.0, beta);
            let neighbours = amps[i + 1] + amps[i - 1];
            self.rhs[j] =
                amps[i] * Complex64::new(1.0, -beta) + neighbours * Complex64::new(0.0, alpha);
        }
        tridiag::solve_in_place(
            &self.lower,
            &self.diag,
            &self.upper,
            &mut self.rhs,
            &mut self.scratch,
        )?;
        let out = psi.amplitudes_mut();
        out[1..n - 1].copy_from_slice(&self.rhs);
        psi.advance_step();
        Ok(())
    }
}

/// One step as a pure function.
pub fn step(psi: &WaveFunction, schedule: &BarrierSchedule) -> Result<WaveFunction> {
    let mut next = psi.clone();
    Propagator::new(psi.grid(), *schedule)?.step(&mut next)?;
    Ok(next)
}

/// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩` with the discrete Hamiltonian used by the stepper.
pub fn mean_energy(psi: &WaveFunction, potential: &[f64]) -> f64 {
    let g = psi.grid();
    let a = psi.amplitudes();
    let inv_dx2 = 1.0 / (g.dx() * g.dx());
    let n = a.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..n - 1 {
        let lap = (a[i + 1] - 2.0 * a[i] + a[i - 1]) * inv_dx2;
        let h = -KINETIC * lap + potential[i] * a[i];
        num += (a[i].conj() * h).re;
        den += a[i].norm_sqr();
    }
    num / den
}

/// Wavefunction history of one run.
#[derive(Debug, Clone)]
pub struct PropagationRecord {
    pub grid: Grid,
    pub schedule: BarrierSchedule,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<Complex64>>,
    /// Barrier height at each recorded instant.
    pub potential_heights: Vec<f64>,
    /// Largest relative norm change observed over the run.
    pub norm_drift: f64,
}

impl PropagationRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_density(&self, k: usize) -> Vec<f64> {
        crate::state::density_of(&self.frames[k])
    }

    /// Index of the frame recorded at `step`, if any.
    pub fn frame_at_step(&self, step: u64) -> Option<usize> {
        self.steps.binary_search(&step).ok()
    }

    pub fn wavefunction(&self, k: usize) -> WaveFunction {
        let mut psi = WaveFunction::from_amplitudes(self.grid, self.frames[k].clone())
            .expect("recorded frame matches grid");
        for _ in 0..self.steps[k] {
            psi.advance_step();
        }
        psi
    }
}

/// Runs `n_steps` steps, recording the initial frame, every
/// `record_every`-th step and the final step.
pub fn propagate(
    psi0: &WaveFunction,
    schedule: &BarrierSchedule,
    n_steps: u64,
    record_every: u64,
) -> Result<PropagationRecord> {
    if n_steps == 0 {
        return Err(Error::argument("n_steps must be at least 1"));
    }
    if record_every == 0 {
        return Err(Error::argument("record_every must be at least 1"));
    }
    let grid = *psi0.grid();
    let mut stepper = Propagator::new(&grid, *schedule)?;
    let mut psi = psi0.clone();
    let norm0 = psi.norm();
    let capacity = (n_steps / record_every + 2) as usize;
    let mut record = PropagationRecord {
        grid,
        schedule: *schedule,
        steps: Vec::with_capacity(capacity),
        times: Vec::with_capacity(capacity),
        frames: Vec::with_capacity(capacity),
        potential_heights: Vec::with_capacity(capacity),
        norm_drift: 0.0,
    };
    let push = |record: &mut PropagationRecord, psi: &WaveFunction| {
        record.steps.push(psi.step());
        record.times.push(psi.t());
        record.potential_heights.push(schedule.height_at(psi.t()));
        record.frames.push(psi.amplitudes().to_vec());
    };
    push(&mut record, &psi);
    let mut drift: f64 = 0.0;
    for n in 1..=n_steps {
        stepper.step(&mut psi)?;
        let norm = total_integral(&grid, &psi.density());
        drift = drift.max(((norm - norm0) / norm0).abs());
        if n % record_every == 0 || n == n_steps {
            push(&mut record, &psi);
        }
    }
    record.norm_drift = drift;
    Ok(record)
}
