//! Angle-setting errors on the preparation and measurement circuits and the
//! spread they induce on a witness value.

use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{edges, evaluate, InequalitySpec, OverlapSet};
use crate::mesh::circuits::CircuitFamily;
use crate::rng::{Rng, Seed};

/// Each phase setting `a` of the mesh is realized as `a (1 + eps u) + delta v`
/// with `u`, `v` uniform on `[-1, 1]`, drawn independently for every setting
/// and stage. The settings are the MZI internal phases `pi - 2 t` for the
/// amplitude angles `t` of a [`CircuitFamily`] and the external phases as
/// they are.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngleNoise {
    /// Relative error bound.
    pub eps: f64,
    /// Additive bias bound, in degrees.
    pub delta_deg: f64,
}

impl AngleNoise {
    pub fn new(eps: f64, delta_deg: f64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::param("eps", "must be finite and non-negative"));
        }
        if !(delta_deg.is_finite() && delta_deg >= 0.0) {
            return Err(Error::param("delta_deg", "must be finite and non-negative"));
        }
        Ok(Self { eps, delta_deg })
    }

    pub fn is_zero(&self) -> bool {
        self.eps == 0.0 && self.delta_deg == 0.0
    }

    /// Perturbed copy of raw settings. Always consumes two draws per setting
    /// so that runs with different magnitudes share random numbers.
    pub fn perturb(&self, settings: &[f64], rng: &mut Rng) -> Vec<f64> {
        let delta = self.delta_deg.to_radians();
        settings
            .iter()
            .map(|&a| {
                let u: f64 = rng.random_range(-1.0..=1.0);
                let v: f64 = rng.random_range(-1.0..=1.0);
                a * (1.0 + self.eps * u) + delta * v
            })
            .collect()
    }

    /// Circuit parameters of `family` after perturbing the mesh settings
    /// that realize them.
    pub fn perturb_circuit(&self, family: CircuitFamily, params: &[f64], rng: &mut Rng) -> Vec<f64> {
        let k = family.num_thetas();
        let settings: Vec<f64> = params
            .iter()
            .enumerate()
            .map(|(i, &p)| if i < k { PI - 2.0 * p } else { p.rem_euclid(2.0 * PI) })
            .collect();
        self.perturb(&settings, rng)
            .into_iter()
            .enumerate()
            .map(|(i, s)| if i < k { (PI - s) / 2.0 } else { s })
            .collect()
    }
}

/// Overlaps `r_ij = |<meas_j|prep_i>|^2` for `i < j`, with preparation and
/// measurement angles perturbed independently. Without noise the result is
/// the ideal overlap set.
pub fn noisy_overlaps(
    family: CircuitFamily,
    params: &[Vec<f64>],
    noise: &AngleNoise,
    rng: &mut Rng,
) -> Result<OverlapSet> {
    let n = params.len();
    let mut prep = Vec::with_capacity(n);
    let mut meas = Vec::with_capacity(n);
    for p in params {
        prep.push(family.prepare(&noise.perturb_circuit(family, p, rng))?);
        meas.push(family.prepare(&noise.perturb_circuit(family, p, rng))?);
    }
    let upper = edges(n)
        .map(|(i, j)| meas[j].overlap(&prep[i]))
        .collect::<Result<Vec<f64>>>()?;
    OverlapSet::new(n, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub eps: f64,
    pub delta_deg: f64,
    pub ideal: f64,
    pub min: f64,
    pub max: f64,
    /// Largest deviation of a sample from the ideal value.
    pub half_width: f64,
    pub samples: Vec<f64>,
}

impl Dispersion {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Monte-Carlo envelope of `spec` evaluated on noisy overlaps of the states
/// prepared by `params`. Trial `t` draws from stream `t` of `seed`.
pub fn dispersion(
    spec: &InequalitySpec,
    family: CircuitFamily,
    params: &[Vec<f64>],
    noise: &AngleNoise,
    trials: usize,
    seed: Seed,
) -> Result<Dispersion> {
    AngleNoise::new(noise.eps, noise.delta_deg)?;
    if params.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: params.len(),
        });
    }
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    let ideal_set = noisy_overlaps(family, params, &AngleNoise::default(), &mut seed.rng())?;
    let ideal = evaluate(spec, &ideal_set)?;
    let samples = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.stream(t);
            evaluate(spec, &noisy_overlaps(family, params, noise, &mut rng)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let min = samples.iter().cloned().fold(ideal, f64::min);
    let max = samples.iter().cloned().fold(ideal, f64::max);
    Ok(Dispersion {
        eps: noise.eps,
        delta_deg: noise.delta_deg,
        ideal,
        min,
        max,
        half_width: (max - ideal).max(ideal - min),
        samples,
    })
}

/// Dispersion over a grid of noise settings. Each reported envelope covers
/// every setting up to and including its own (errors bounded by the given
/// magnitudes), so widths never decrease along the grid.
pub fn dispersion_sweep(
    spec: &InequalitySpec,
    family: CircuitFamily,
    params: &[Vec<f64>],
    grid: &[AngleNoise],
    trials: usize,
    seed: Seed,
) -> Result<Vec<Dispersion>> {
    let mut out: Vec<Dispersion> = Vec::with_capacity(grid.len());
    for noise in grid {
        let mut d = dispersion(spec, family, params, noise, trials, seed)?;
        if let Some(prev) = out.last() {
            d.min = d.min.min(prev.min);
            d.max = d.max.max(prev.max);
            d.half_width = (d.max - d.ideal).max(d.ideal - d.min);
        }
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::make_hn;
    use crate::mesh::circuits::hn_simplex_states;

    fn h5_params() -> Vec<Vec<f64>> {
        hn_simplex_states(5)
            .unwrap()
            .iter()
            .map(|s| CircuitFamily::Ququart.params_from_state(s).unwrap())
            .collect()
    }

    #[test]
    fn noiseless_envelope_is_flat() {
        let d = dispersion(
            &make_hn(5).unwrap(),
            CircuitFamily::Ququart,
            &h5_params(),
            &AngleNoise::default(),
            50,
            Seed(1),
        )
        .unwrap();
        assert!((d.ideal - 1.375).abs() < 1e-12);
        assert!(d.width() < 1e-12);
    }

    #[test]
    fn noise_breaks_symmetry() {
        let params = h5_params();
        let noise = AngleNoise::new(0.01, 1.0).unwrap();
        let mut rng = Seed(2).rng();
        let n = params.len();
        let mut prep = Vec::new();
        let mut meas = Vec::new();
        for p in &params {
            prep.push(
                CircuitFamily::Ququart
                    .prepare(&noise.perturb_circuit(CircuitFamily::Ququart, p, &mut rng))
                    .unwrap(),
            );
            meas.push(
                CircuitFamily::Ququart
                    .prepare(&noise.perturb_circuit(CircuitFamily::Ququart, p, &mut rng))
                    .unwrap(),
            );
        }
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i < j)
            .map(|(i, j)| (meas[j].overlap(&prep[i]).unwrap() - meas[i].overlap(&prep[j]).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(asym > 1e-6);
    }

    #[test]
    fn sweep_is_monotone() {
        let grid: Vec<AngleNoise> = (0..5)
            .map(|k| AngleNoise::new(0.002 * k as f64, 0.0).unwrap())
            .collect();
        let sweep = dispersion_sweep(
            &make_hn(5).unwrap(),
            CircuitFamily::Ququart,
            &h5_params(),
            &grid,
            40,
            Seed(3),
        )
        .unwrap();
        for w in sweep.windows(2) {
            assert!(w[1].width() >= w[0].width());
        }
        assert!(sweep[0].width() < 1e-12);
    }

    #[test]
    fn negative_noise_rejected() {
        assert!(AngleNoise::new(-0.1, 0.0).is_err());
    }
}
