//! Oracles shared by the integration tests. Nothing here calls into the
//! solver; the closed forms are written out from scratch.

#![allow(dead_code)]

use num_complex::Complex64;

pub const X0: f64 = -0.3;
pub const K0: f64 = 187.5;

pub fn sigma() -> f64 {
    0.05 / 2f64.sqrt()
}

/// Freely spreading Gaussian for `i ψ_t = −ψ_xx`, density standard
/// deviation `sigma` at `t = 0`.
pub fn free_gaussian(x: f64, t: f64, x0: f64, sigma: f64, k0: f64) -> Complex64 {
    let s2 = sigma * sigma;
    let spread = Complex64::new(1.0, t / s2);
    let shift = x - x0 - 2.0 * k0 * t;
    let norm = (2.0 * std::f64::consts::PI * s2).powf(-0.25);
    let exponent =
        -shift * shift / (4.0 * s2 * spread) + Complex64::i() * (k0 * (x - x0) - k0 * k0 * t);
    norm / spread.sqrt() * exponent.exp()
}

pub fn free_density(x: f64, t: f64, x0: f64, sigma: f64, k0: f64) -> f64 {
    free_gaussian(x, t, x0, sigma, k0).norm_sqr()
}

/// Standard deviation of the free density at time `t`.
pub fn free_width(t: f64, sigma: f64) -> f64 {
    (sigma * sigma + (t / sigma).powi(2)).sqrt()
}

/// Largest pointwise density error relative to the oracle peak.
pub fn relative_density_error(xs: impl Iterator<Item = f64>, numeric: &[f64], t: f64) -> f64 {
    let exact: Vec<f64> = xs.map(|x| free_density(x, t, X0, sigma(), K0)).collect();
    let peak = exact.iter().cloned().fold(0.0, f64::max);
    numeric
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / peak
}
