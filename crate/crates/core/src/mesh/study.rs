//! Fidelity of meshes whose phases are set with small random errors.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::unitary::{compose, decompose, fidelity};
use crate::rng::Seed;
use crate::state::haar_random_unitary;

/// Standard deviation (radians) of the phase errors that puts the mean
/// 6-mode fidelity near 0.995.
pub const DEFAULT_PHASE_SIGMA: f64 = 0.09;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityStudy {
    pub modes: usize,
    pub phase_sigma: f64,
    pub fidelities: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Decompose `count` Haar-random unitaries, add Gaussian errors of standard
/// deviation `phase_sigma` to every internal and external phase, and report
/// the fidelity of the resulting transformations. Unitary `k` uses stream `k`.
pub fn perturbed_mesh_study(modes: usize, count: usize, phase_sigma: f64, seed: Seed) -> Result<FidelityStudy> {
    if count == 0 {
        return Err(Error::param("count", "need at least one unitary"));
    }
    if !(phase_sigma.is_finite() && phase_sigma >= 0.0) {
        return Err(Error::param("phase_sigma", "must be finite and non-negative"));
    }
    let normal = Normal::new(0.0, phase_sigma).map_err(|e| Error::param("phase_sigma", e.to_string()))?;
    let fidelities = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.stream(k);
            let u = haar_random_unitary(modes, &mut rng);
            let mut config = decompose(&u)?;
            for cell in &mut config.cells {
                cell.theta += normal.sample(&mut rng);
                cell.phi += normal.sample(&mut rng);
            }
            if let Some(phases) = config.output_phases.as_mut() {
                for p in phases {
                    *p += normal.sample(&mut rng);
                }
            }
            fidelity(&u, &compose(&config.wrapped())?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = fidelities.iter().sum::<f64>() / count as f64;
    let min = fidelities.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FidelityStudy {
        modes,
        phase_sigma,
        fidelities,
        mean,
        min,
        max,
    })
}
