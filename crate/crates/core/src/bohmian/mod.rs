//! Bohmian particle dynamics on recorded wavefunction frames.

pub mod ensemble;
pub mod fields;
pub mod newton;
pub mod trajectory;

pub use ensemble::{
    compare_arrivals, integrate_ensemble, sample_initial_positions, superarrival_betas,
    ParticleBeta, SamplingScheme, SuperarrivalEnsemble, TrajectoryEnsemble,
};
pub use fields::{
    quantum_potential, transport_velocity_field, velocity_field, QuantumPotentialField,
    VelocityField, DEFAULT_NODE_FLOOR,
};
pub use newton::{newton_residual, NewtonResidual, SampleFlag, MAX_FORCE_BEND};
pub use trajectory::{arrival_time, integrate_trajectory, Direction, PathStatus, Trajectory};
