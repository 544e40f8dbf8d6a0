//! Maximizing and bounding inequality functionals over quantum states.

pub mod maximize;
pub mod sampling;
pub mod sdp;
pub mod simplex;
pub mod thresholds;

pub use maximize::{maximize_pure, maximize_pure_with, MaximizationResult, MaximizeConfig};
pub use sampling::{haar_experiment, histogram, SamplingReport, VIOLATION_TOL};
pub use sdp::{project_spectrahedron, sdp_objective, sdp_upper_bound, SdpConfig, SdpResult};
pub use simplex::project_simplex;
pub use thresholds::{default_thresholds, dimension_thresholds, CellMethod, ThresholdCell, ThresholdConfig};
