//! Simulation of the programmable rectangular interferometer.

pub mod calibration;
pub mod circuits;
pub mod counts;
pub mod noise;
pub mod study;
pub mod unitary;

pub use calibration::{
    calibration_fit, calibration_forward, calibration_inverse, recovery_error, simulate_all_sweeps, simulate_sweep,
    sweep_currents, sweep_residual, synthetic_model, CalibrationModel, RecoveryError, SweepPoint,
};
pub use circuits::{
    h4_qutrit_states, hn_simplex_states, maximize_in_family, pentagon_states, prepare_5mode, prepare_qubit,
    prepare_ququart, prepare_qutrit, CircuitFamily, FamilyMaximization,
};
pub use counts::{overlap_via_counts, overlap_via_counts_with, port_probabilities, CountRecord, Detection};
pub use noise::{dispersion, dispersion_sweep, noisy_overlaps, AngleNoise, Dispersion};
pub use study::{perturbed_mesh_study, FidelityStudy, DEFAULT_PHASE_SIGMA};
pub use unitary::{
    compose, cross_power, decompose, fidelity, mzi, rectangular_layout, unitary_deviation, wrap_angle, MeshCell,
    MeshConfig,
};
