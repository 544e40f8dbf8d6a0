//! Photon-count simulation of overlap measurements.
//!
//! A photon prepared in `|prep>` is sent through the inverse of the
//! measurement circuit; the click probability at port 0 is `|<meas|prep>|^2`.

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::circuits::CircuitFamily;
use crate::mesh::noise::AngleNoise;
use crate::rng::{Rng, Seed};
use crate::state::{check_dims, PureState};

/// Detector imperfections. Defaults describe an ideal detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Probability that a photon is detected at all.
    pub efficiency: f64,
    /// Probability of a spurious click in a trial where no photon was
    /// detected; the click lands on a uniformly random port.
    pub dark_probability: f64,
}

impl Default for Detection {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub counts: Vec<u64>,
    pub total_trials: u64,
    /// `k / N_det` per port, with `N_det` the total number of clicks.
    pub estimated_probability: Vec<f64>,
    /// `sqrt(k) / N_det` per port.
    pub sigma_c: Vec<f64>,
    /// The ideal port-0 probability of the (possibly perturbed) circuit.
    pub true_probability: f64,
}

impl CountRecord {
    pub fn detected(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Overlap estimate (port 0).
    pub fn estimate(&self) -> f64 {
        self.estimated_probability[0]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_c[0]
    }

    fn from_counts(counts: Vec<u64>, total_trials: u64, true_probability: f64) -> Self {
        let detected: u64 = counts.iter().sum();
        let denom = detected.max(1) as f64;
        let estimated_probability = counts.iter().map(|&k| k as f64 / denom).collect();
        let sigma_c = counts.iter().map(|&k| (k as f64).sqrt() / denom).collect();
        Self {
            counts,
            total_trials,
            estimated_probability,
            sigma_c,
            true_probability,
        }
    }
}

/// Output-port distribution of `prep` after the inverse measurement circuit:
/// port 0 receives `|<meas|prep>|^2` and the remaining ports the components
/// orthogonal to `meas` in a fixed completion basis.
pub fn port_probabilities(prep: &PureState, meas: &PureState) -> Result<Vec<f64>> {
    check_dims(prep.dim(), meas.dim())?;
    let d = prep.dim();
    let m = meas.amplitudes();
    let p = prep.amplitudes();
    // Householder reflection mapping |meas> to e^{i a}|0>; its rows are an
    // orthonormal basis whose first element is |meas> up to phase.
    let alpha = if m[0].norm() > 0.0 {
        m[0] / m[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut v: Vec<Complex64> = m.iter().cloned().collect();
    v[0] += alpha;
    let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let vp: Complex64 = v.iter().zip(p.iter()).map(|(a, b)| a.conj() * b).sum();
    let out: Vec<f64> = (0..d)
        .map(|k| {
            let hp = p[k] - v[k] * (2.0 * vp / vn);
            hp.norm_sqr()
        })
        .collect();
    let total: f64 = out.iter().sum();
    Ok(out.into_iter().map(|x| (x / total).clamp(0.0, 1.0)).collect())
}

fn multinomial(n: u64, probs: &[f64], rng: &mut Rng) -> Result<Vec<u64>> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = vec![0u64; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(out)
}

/// Simulate `trials` heralded photons measuring the overlap of `prep` with
/// `meas`. With `noise`, both circuits are re-parameterized with perturbed
/// angles (independently) before detection.
pub fn overlap_via_counts(
    prep: &PureState,
    meas: &PureState,
    trials: u64,
    seed: Seed,
    noise: Option<&AngleNoise>,
) -> Result<CountRecord> {
    overlap_via_counts_with(prep, meas, trials, seed, noise, &Detection::default())
}

pub fn overlap_via_counts_with(
    prep: &PureState,
    meas: &PureState,
    trials: u64,
    seed: Seed,
    noise: Option<&AngleNoise>,
    detection: &Detection,
) -> Result<CountRecord> {
    check_dims(prep.dim(), meas.dim())?;
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    if !(0.0..=1.0).contains(&detection.efficiency) || !(0.0..=1.0).contains(&detection.dark_probability) {
        return Err(Error::param(
            "detection",
            "efficiency and dark probability must lie in [0, 1]",
        ));
    }
    let mut rng = seed.rng();
    let (prep, meas) = match noise {
        Some(noise) if !noise.is_zero() => {
            let family = CircuitFamily::for_dim(prep.dim())?;
            let pp = noise.perturb_circuit(family, &family.params_from_state(prep)?, &mut rng);
            let mp = noise.perturb_circuit(family, &family.params_from_state(meas)?, &mut rng);
            (family.prepare(&pp)?, family.prepare(&mp)?)
        }
        _ => (prep.clone(), meas.clone()),
    };
    let probs = port_probabilities(&prep, &meas)?;
    let d = probs.len();
    let detected = Binomial::new(trials, detection.efficiency)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .sample(&mut rng);
    let mut counts = multinomial(detected, &probs, &mut rng)?;
    if detection.dark_probability > 0.0 {
        let dark = Binomial::new(trials - detected, detection.dark_probability)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sample(&mut rng);
        let uniform = vec![1.0 / d as f64; d];
        for (c, extra) in counts.iter_mut().zip(multinomial(dark, &uniform, &mut rng)?) {
            *c += extra;
        }
    }
    Ok(CountRecord::from_counts(counts, trials, probs[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::haar_random_pure;

    #[test]
    fn port_distribution_sums_to_one() {
        for k in 0..20 {
            let a = haar_random_pure(4, Seed(k)).unwrap();
            let b = haar_random_pure(4, Seed(100 + k)).unwrap();
            let p = port_probabilities(&a, &b).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((p[0] - a.overlap(&b).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_and_orthogonal() {
        let a = PureState::basis(3, 0).unwrap();
        let r = overlap_via_counts(&a, &a, 10_000, Seed(0), None).unwrap();
        assert_eq!(r.counts[0], 10_000);
        assert!((r.sigma() - 0.01).abs() < 1e-12);
        let b = PureState::basis(3, 2).unwrap();
        let r = overlap_via_counts(&a, &b, 10_000, Seed(0), None).unwrap();
        assert_eq!(r.estimate(), 0.0);
    }

    #[test]
    fn losses_keep_counts_bounded() {
        let a = haar_random_pure(3, Seed(4)).unwrap();
        let b = haar_random_pure(3, Seed(5)).unwrap();
        let det = Detection {
            efficiency: 0.6,
            dark_probability: 0.05,
        };
        let r = overlap_via_counts_with(&a, &b, 5000, Seed(6), None, &det).unwrap();
        assert!(r.detected() <= r.total_trials);
        assert!(r.detected() > 2500);
    }

    #[test]
    fn deterministic() {
        let a = haar_random_pure(2, Seed(4)).unwrap();
        let b = haar_random_pure(2, Seed(5)).unwrap();
        let n = AngleNoise::new(0.01, 0.5).unwrap();
        let x = overlap_via_counts(&a, &b, 1000, Seed(9), Some(&n)).unwrap();
        let y = overlap_via_counts(&a, &b, 1000, Seed(9), Some(&n)).unwrap();
        assert_eq!(x, y);
    }
}
