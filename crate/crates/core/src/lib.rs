//! Overlap-based witnesses of set coherence and Hilbert-space dimension.
//!
//! The crate is organised bottom-up:
//!
//! * [`state`]: pure and mixed states, two-state overlaps, the depolarizing
//!   channel, Haar sampling and Hermitian eigenvalue helpers.
//! * [`graphs`]: linear functionals on the complete event graph `K_n`
//!   (the `h_n` family, the pentagon `h_MZI` witness) and verdicts.
//! * [`optimize`]: maximization over pure states, the quadratic SDP upper
//!   bound, Haar sampling experiments and dimension-threshold tables.
//! * [`contextuality`]: the interrogation task, its depolarizing-noise
//!   robustness and the hexagon preparation fragment.
//! * [`mesh`]: a simulator of the rectangular MZI mesh used to prepare,
//!   measure and calibrate the states above.

pub mod contextuality;
pub mod error;
pub mod graphs;
pub mod mesh;
pub mod optimize;
pub mod rng;
pub mod state;
pub mod tolerances;

pub use error::{Error, Result};
pub use rng::Seed;
pub use tolerances::Tolerances;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
