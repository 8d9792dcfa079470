//! Discretization frame and wavefunction representation.
//!
//! Space is a uniform lattice on a hard-wall box `[x_min, x_max]`; the two
//! boundary sites always carry zero amplitude. All spatial integrals use the
//! trapezoid rule with linear interpolation of the density at off-lattice
//! endpoints.

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Uniform 1D lattice plus the time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dt: f64,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, dt: f64) -> Result<Self> {
        if !x_min.is_finite() {
            return Err(Error::config("x_min", "must be finite"));
        }
        if !x_max.is_finite() {
            return Err(Error::config("x_max", "must be finite"));
        }
        if !dt.is_finite() {
            return Err(Error::config("dt", "must be finite"));
        }
        if x_min >= x_max {
            return Err(Error::config("x_min", "x_min ≥ x_max"));
        }
        if n_points < 3 {
            return Err(Error::config("n_points", "need at least 3 lattice sites"));
        }
        if dt <= 0.0 {
            return Err(Error::config("dt", "time step must be positive"));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        if dx <= 0.0 {
            return Err(Error::config("n_points", "lattice spacing underflows"));
        }
        Ok(Grid {
            x_min,
            x_max,
            n_points,
            dt,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of site `i`, computed from the index (never accumulated).
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub fn strictly_inside(&self, x: f64) -> bool {
        x > self.x_min && x < self.x_max
    }

    /// Time of step `n`.
    #[inline]
    pub fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    pub fn nearest_site(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.dx).round();
        s.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Cell `i` (between sites `i` and `i + 1`) containing `x`, and the
    /// fractional offset inside it. `x` is clamped to the box.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.x_min) / self.dx).clamp(0.0, (self.n_points - 1) as f64);
        let i = (s.floor() as usize).min(self.n_points - 2);
        (i, s - i as f64)
    }
}

/// Convenience constructor mirroring [`Grid::new`].
pub fn build_grid(x_min: f64, x_max: f64, n_points: usize, dt: f64) -> Result<Grid> {
    Grid::new(x_min, x_max, n_points, dt)
}

/// Linearly interpolated lattice function at `x`.
#[inline]
pub fn interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let (i, f) = grid.locate(x);
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Trapezoid integral of a lattice density over `[a, b]`.
///
/// The interval is clipped to the box; endpoints that fall between sites use
/// the linear interpolant, so the integral is additive over adjacent
/// intervals.
pub fn integrate_density(grid: &Grid, density: &[f64], a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::argument(format!(
            "region lower bound {a} must be below upper bound {b}"
        )));
    }
    debug_assert_eq!(density.len(), grid.n_points());
    let a = a.max(grid.x_min());
    let b = b.min(grid.x_max());
    if a >= b {
        return Ok(0.0);
    }
    let (ia, fa) = grid.locate(a);
    let (ib, fb) = grid.locate(b);
    let rho_a = density[ia] * (1.0 - fa) + density[ia + 1] * fa;
    let rho_b = density[ib] * (1.0 - fb) + density[ib + 1] * fb;
    let dx = grid.dx();
    if ia == ib {
        return Ok(0.5 * (fb - fa) * dx * (rho_a + rho_b));
    }
    let mut sum = 0.5 * (1.0 - fa) * dx * (rho_a + density[ia + 1]);
    let mut inner = 0.0;
    for j in ia + 1..ib {
        inner += density[j] + density[j + 1];
    }
    sum += 0.5 * dx * inner;
    sum += 0.5 * fb * dx * (density[ib] + rho_b);
    Ok(sum)
}

/// Full trapezoid integral of a lattice density.
pub fn total_integral(grid: &Grid, density: &[f64]) -> f64 {
    let n = density.len();
    let interior: f64 = density[1..n - 1].iter().sum();
    grid.dx() * (interior + 0.5 * (density[0] + density[n - 1]))
}

/// Running trapezoid integral from `x_min` to each site.
pub fn cumulative_integral(grid: &Grid, density: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(density.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in density.windows(2) {
        acc += 0.5 * grid.dx() * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

pub fn density_of(amplitudes: &[Complex64]) -> Vec<f64> {
    amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Complex amplitudes on the lattice at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
    step: u64,
}

impl WaveFunction {
    /// Wraps amplitudes at step 0. Boundary sites are forced to zero.
    pub fn from_amplitudes(grid: Grid, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::argument(format!(
                "expected {} amplitudes, got {}",
                grid.n_points(),
                amplitudes.len()
            )));
        }
        let n = amplitudes.len();
        amplitudes[0] = Complex64::new(0.0, 0.0);
        amplitudes[n - 1] = Complex64::new(0.0, 0.0);
        Ok(WaveFunction {
            grid,
            amplitudes,
            step: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn advance_step(&mut self) {
        self.step += 1;
    }

    /// Current time, `step · dt`.
    pub fn t(&self) -> f64 {
        self.grid.time_of(self.step)
    }

    /// Complex conjugate of every amplitude (time reversal for real H).
    pub fn conjugated(&self) -> WaveFunction {
        WaveFunction {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a.conj()).collect(),
            step: self.step,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        density_of(&self.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        total_integral(&self.grid, &self.density())
    }

    pub fn probability_in_region(&self, a: f64, b: f64) -> Result<f64> {
        integrate_density(&self.grid, &self.density(), a, b)
    }

    pub fn mean_position(&self) -> f64 {
        let rho = self.density();
        let weighted: Vec<f64> = rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * self.grid.x(i))
            .collect();
        total_integral(&self.grid, &weighted) / total_integral(&self.grid, &rho)
    }

    pub fn position_variance(&self) -> f64 {
        let rho = self.density();
        let mean = self.mean_position();
        let weighted: Vec<f64> = rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * (self.grid.x(i) - mean).powi(2))
            .collect();
        total_integral(&self.grid, &weighted) / total_integral(&self.grid, &rho)
    }
}

/// Initial Gaussian packet: center, half width of |ψ|² and central wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacketSpec {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
}

impl GaussianPacketSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::config("x0", "must be finite"));
        }
        if !self.k0.is_finite() {
            return Err(Error::config("k0", "must be finite"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("sigma", "must be positive and finite"));
        }
        let margin = 5.0 * self.sigma;
        if (self.x0 - grid.x_min()).abs() <= margin || self.x0 <= grid.x_min() {
            return Err(Error::config(
                "x0",
                "packet lies within 5σ of the left wall",
            ));
        }
        if (grid.x_max() - self.x0).abs() <= margin || self.x0 >= grid.x_max() {
            return Err(Error::config(
                "x0",
                "packet lies within 5σ of the right wall",
            ));
        }
        Ok(())
    }

    /// Probability mass of the continuum Gaussian outside the box.
    pub fn boundary_tail(&self, grid: &Grid) -> f64 {
        let s = self.sigma * std::f64::consts::SQRT_2;
        0.5 * erfc((self.x0 - grid.x_min()) / s) + 0.5 * erfc((grid.x_max() - self.x0) / s)
    }

    /// Unnormalized amplitude at `x`.
    pub fn amplitude(&self, x: f64) -> Complex64 {
        let d = x - self.x0;
        let envelope = (-d * d / (4.0 * self.sigma * self.sigma)).exp();
        Complex64::from_polar(envelope, self.k0 * x)
    }
}

/// Samples the packet on the grid, zeroes the walls and normalizes once.
pub fn init_gaussian(grid: &Grid, spec: &GaussianPacketSpec) -> Result<WaveFunction> {
    spec.validate(grid)?;
    let amplitudes: Vec<Complex64> = grid.positions().map(|x| spec.amplitude(x)).collect();
    let mut psi = WaveFunction::from_amplitudes(*grid, amplitudes)?;
    let scale = psi.norm().sqrt().recip();
    for a in psi.amplitudes_mut() {
        *a *= scale;
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid() -> Grid {
        Grid::new(-1.0, 1.0, 8193, 2e-6).unwrap()
    }

    fn default_spec() -> GaussianPacketSpec {
        GaussianPacketSpec {
            x0: -0.3,
            sigma: 0.05 / 2f64.sqrt(),
            k0: 187.5,
        }
    }

    #[test]
    fn grid_spacing_and_sites() {
        let g = default_grid();
        assert_eq!(g.dx(), 2.0 / 8192.0);
        let g3 = Grid::new(-1.0, 1.0, 3, 2e-6).unwrap();
        let xs: Vec<f64> = g3.positions().collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let e = Grid::new(0.0, 0.0, 100, 2e-6).unwrap_err();
        assert!(e.to_string().contains("x_min ≥ x_max"), "{e}");
        assert!(matches!(
            Grid::new(-1.0, 1.0, 2, 2e-6),
            Err(Error::Config { ref field, .. }) if field == "n_points"
        ));
        assert!(matches!(
            Grid::new(-1.0, 1.0, 10, 0.0),
            Err(Error::Config { ref field, .. }) if field == "dt"
        ));
        assert!(matches!(
            Grid::new(f64::NAN, 1.0, 10, 1e-3),
            Err(Error::Config { ref field, .. }) if field == "x_min"
        ));
        assert!(matches!(
            Grid::new(-1.0, f64::INFINITY, 10, 1e-3),
            Err(Error::Config { ref field, .. }) if field == "x_max"
        ));
    }

    #[test]
    fn gaussian_is_normalized_and_peaked_at_x0() {
        let g = default_grid();
        let psi = init_gaussian(&g, &default_spec()).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-9);
        let rho = psi.density();
        let argmax = rho
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, g.nearest_site(-0.3));
        assert_eq!(psi.amplitudes()[0], Complex64::new(0.0, 0.0));
        assert_eq!(psi.amplitudes()[g.n_points() - 1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_momentum_packet_is_real() {
        let g = default_grid();
        let spec = GaussianPacketSpec {
            k0: 0.0,
            ..default_spec()
        };
        let psi = init_gaussian(&g, &spec).unwrap();
        let center = psi.amplitudes()[g.nearest_site(spec.x0)];
        let phase = Complex64::from_polar(1.0, -center.arg());
        for a in psi.amplitudes() {
            assert!((a * phase).im.abs() <= 1e-15);
        }
    }

    #[test]
    fn density_variance_is_sigma_squared() {
        let g = default_grid();
        let spec = default_spec();
        let psi = init_gaussian(&g, &spec).unwrap();
        let var = psi.position_variance();
        let expected = spec.sigma * spec.sigma;
        assert!(
            (var / expected - 1.0).abs() < 0.01,
            "variance {var} vs {expected}"
        );
    }

    #[test]
    fn left_detector_region_is_empty_initially() {
        let g = default_grid();
        let spec = default_spec();
        let psi = init_gaussian(&g, &spec).unwrap();
        let p = psi.probability_in_region(g.x_min(), -0.5).unwrap();
        // Oracle: Gaussian tail beyond 0.2 from the center.
        let tail = 0.5 * erfc(0.2 / (std::f64::consts::SQRT_2 * spec.sigma));
        assert!(tail < 1e-6);
        assert!(p <= 1e-6, "p = {p}");
        assert!((p - tail).abs() < 1e-9);
        let whole = psi.probability_in_region(g.x_min(), g.x_max()).unwrap();
        assert!((whole - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inverted_region_is_rejected() {
        let g = default_grid();
        let psi = init_gaussian(&g, &default_spec()).unwrap();
        assert!(matches!(
            psi.probability_in_region(0.3, 0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn packet_near_wall_is_rejected() {
        let g = default_grid();
        let spec = GaussianPacketSpec {
            x0: -0.95,
            ..default_spec()
        };
        assert!(matches!(
            init_gaussian(&g, &spec),
            Err(Error::Config { ref field, .. }) if field == "x0"
        ));
        let spec = GaussianPacketSpec {
            sigma: -1.0,
            ..default_spec()
        };
        assert!(init_gaussian(&g, &spec).is_err());
    }

    #[test]
    fn boundary_tail_is_negligible_for_defaults() {
        assert!(default_spec().boundary_tail(&default_grid()) < 1e-12);
        let spec = GaussianPacketSpec {
            x0: -0.7,
            sigma: 0.05,
            k0: 0.0,
        };
        assert!(spec.boundary_tail(&default_grid()) > 1e-12);
    }

    #[test]
    fn interpolation_and_cumulative() {
        let g = Grid::new(0.0, 1.0, 5, 1.0).unwrap();
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert!((interpolate(&g, &v, 0.375) - 1.5).abs() < 1e-15);
        let c = cumulative_integral(&g, &v);
        assert!((c[4] - total_integral(&g, &v)).abs() < 1e-15);
        assert!((c[4] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_cell_region() {
        let g = Grid::new(0.0, 1.0, 5, 1.0).unwrap();
        let v = [1.0; 5];
        let p = integrate_density(&g, &v, 0.3, 0.4).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        assert_eq!(integrate_density(&g, &v, 2.0, 3.0).unwrap(), 0.0);
    }
}
