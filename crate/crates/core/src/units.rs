//! Unit system: ħ = 1 and m = 1/2, so the kinetic prefactor ħ²/2m is exactly 1.

pub const HBAR: f64 = 1.0;
pub const MASS: f64 = 0.5;

/// ħ²/(2m), multiplies −∂²/∂x² in the Hamiltonian.
pub const KINETIC: f64 = HBAR * HBAR / (2.0 * MASS);

/// ħ/m, converts a phase gradient into a Bohmian velocity.
pub const VELOCITY_SCALE: f64 = HBAR / MASS;
