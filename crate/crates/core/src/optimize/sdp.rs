//! Quadratic SDP upper bound on `h_n` at fixed dimension.
//!
//! Writing `X = (1/(n-1)) sum_{k>=1} |psi_k><psi_k|` and rotating `psi_0` to
//! `|0>`, the `h_n` value of any pure realization equals
//!
//! ```text
//! f(X) = -((n-1)^2 / 2) Tr(X^2) + (n-1) <0|X|0> + (n-1)/2
//! ```
//!
//! Relaxing `X` to the full spectrahedron gives a concave maximization,
//! solved here by projected gradient ascent with step `1/L`,
//! `L = (n-1)^2`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::simplex::project_simplex;
use crate::state::{hermitian_eigen, reconstruct, CMatrix, DensityMatrix, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpConfig {
    /// Stop when successive objective values differ by less than this.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SdpConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpResult {
    pub n: usize,
    pub d: usize,
    pub value: f64,
    pub x_star: DensityMatrix,
    pub iterations: usize,
    /// Upper bound on the distance to the optimum: `sqrt(2) * ||G||_F` with
    /// `G` the gradient mapping at `x_star` (`sqrt(2)` is the diameter of
    /// the spectrahedron).
    pub gap_estimate: f64,
    pub converged: bool,
}

/// SDP objective at `x`.
pub fn sdp_objective(n: usize, x: &CMatrix) -> f64 {
    let m = (n - 1) as f64;
    let tr_sq: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    -0.5 * m * m * tr_sq + m * x[(0, 0)].re + 0.5 * m
}

/// `X = (1/k) sum |psi_k><psi_k|` for the given states.
pub fn average_projector(states: &[PureState]) -> Result<CMatrix> {
    let first = states
        .first()
        .ok_or_else(|| Error::param("states", "need at least one state"))?;
    let d = first.dim();
    let mut x = CMatrix::zeros(d, d);
    for s in states {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
        x += s.projector();
    }
    Ok(x.unscale(states.len() as f64))
}

/// Frobenius-nearest density matrix to the Hermitian matrix `h`.
pub fn project_spectrahedron(h: &CMatrix) -> Result<DensityMatrix> {
    if is_diagonal(h) {
        let diag: Vec<f64> = (0..h.nrows()).map(|k| h[(k, k)].re).collect();
        let p = project_simplex(&diag);
        let mut x = CMatrix::zeros(h.nrows(), h.nrows());
        for (k, v) in p.into_iter().enumerate() {
            x[(k, k)] = Complex64::new(v, 0.0);
        }
        return Ok(DensityMatrix::from_trusted(x));
    }
    let eig = hermitian_eigen(h)?;
    let values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let projected = DVector::from_vec(project_simplex(&values));
    Ok(DensityMatrix::from_trusted(reconstruct(&eig.eigenvectors, &projected)))
}

fn is_diagonal(h: &CMatrix) -> bool {
    let n = h.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)] == Complex64::new(0.0, 0.0)))
}

pub fn sdp_upper_bound(n: usize, d: usize, config: &SdpConfig) -> Result<SdpResult> {
    if n < 4 {
        return Err(Error::param(
            "n",
            format!("the SDP bound is defined for n >= 4, got {n}"),
        ));
    }
    if d < 2 || d > n - 1 {
        return Err(Error::param("d", format!("need 2 <= d <= n - 1 = {}, got {d}", n - 1)));
    }
    if !(config.tol > 0.0) || config.max_iterations == 0 {
        return Err(Error::param(
            "config",
            "tolerance and iteration budget must be positive",
        ));
    }
    let m = (n - 1) as f64;
    let lipschitz = m * m;
    let step = |x: &CMatrix| -> Result<CMatrix> {
        // x + grad/L with grad = -(n-1)^2 X + (n-1)|0><0|.
        let mut y = CMatrix::zeros(d, d);
        y[(0, 0)] = Complex64::new(m / lipschitz, 0.0);
        y += x - x.scale(m * m / lipschitz);
        Ok(project_spectrahedron(&y)?.entries().clone())
    };

    let mut x = CMatrix::identity(d, d).unscale(d as f64);
    let mut value = sdp_objective(n, &x);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let next = step(&x)?;
        let next_value = sdp_objective(n, &next);
        iterations += 1;
        let delta = (next_value - value).abs();
        x = next;
        value = next_value;
        if delta < config.tol {
            converged = true;
            break;
        }
    }
    if !value.is_finite() {
        return Err(Error::Numerical("SDP objective became non-finite".into()));
    }
    let mapped = step(&x)?;
    let gap_estimate = 2f64.sqrt() * lipschitz * (mapped - &x).norm();
    Ok(SdpResult {
        n,
        d,
        value,
        x_star: DensityMatrix::from_trusted(x),
        iterations,
        gap_estimate,
        converged,
    })
}

/// Closed-form optimum of the SDP, used to cross-check the solver: the
/// maximizer is `diag(p, (1-p)/(d-1), ...)` with `p = (n+d-2)/(d(n-1))`
/// clipped to `[1/d, 1]`.
pub fn sdp_closed_form(n: usize, d: usize) -> f64 {
    let m = (n - 1) as f64;
    let df = d as f64;
    let p = ((m + df - 1.0) / (df * m)).clamp(1.0 / df, 1.0);
    let rest = if d > 1 { (1.0 - p) / (df - 1.0) } else { 0.0 };
    let tr_sq = p * p + (df - 1.0) * rest * rest;
    -0.5 * m * m * tr_sq + m * p + 0.5 * m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{evaluate_pure, make_hn};
    use crate::rng::Seed;
    use crate::state::{c, haar_random_pure_with};

    #[test]
    fn small_cells() {
        let cfg = SdpConfig::default();
        assert!((sdp_upper_bound(5, 4, &cfg).unwrap().value - 1.375).abs() < 1e-6);
        assert!((sdp_upper_bound(6, 4, &cfg).unwrap().value - 1.0).abs() < 1e-6);
        assert!((sdp_upper_bound(4, 3, &cfg).unwrap().value - 4.0 / 3.0).abs() < 1e-6);
        assert!((sdp_upper_bound(7, 2, &cfg).unwrap().value + 2.75).abs() < 1e-6);
        let big = sdp_upper_bound(64, 63, &cfg).unwrap();
        assert!(big.value > 1.4 && big.value < 1.5);
    }

    #[test]
    fn range_errors() {
        let cfg = SdpConfig::default();
        assert!(sdp_upper_bound(3, 2, &cfg).is_err());
        assert!(sdp_upper_bound(6, 6, &cfg).is_err());
        assert!(sdp_upper_bound(6, 1, &cfg).is_err());
    }

    #[test]
    fn solver_matches_closed_form() {
        let cfg = SdpConfig::default();
        for n in 4..20 {
            for d in 2..n {
                let r = sdp_upper_bound(n, d, &cfg).unwrap();
                assert!(r.converged);
                assert!((r.value - sdp_closed_form(n, d)).abs() < 1e-9, "n={n} d={d}");
                assert!(r.gap_estimate < 1e-6);
                let tr = r.x_star.entries().trace().re;
                assert!((tr - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn objective_identity_on_explicit_states() {
        let mut rng = Seed(17).rng();
        for n in 4..9 {
            let spec = make_hn(n).unwrap();
            for d in 2..5 {
                let mut states = vec![PureState::basis(d, 0).unwrap()];
                for _ in 1..n {
                    states.push(haar_random_pure_with(d, &mut rng).unwrap());
                }
                let x = average_projector(&states[1..]).unwrap();
                let h = evaluate_pure(&spec, &states).unwrap();
                assert!((sdp_objective(n, &x) - h).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_is_nearest_in_two_dimensions() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = c(0.9, 0.0);
        h[(1, 1)] = c(-0.3, 0.0);
        h[(0, 1)] = c(0.4, -0.2);
        h[(1, 0)] = c(0.4, 0.2);
        let p = project_spectrahedron(&h).unwrap();
        let best = (p.entries() - &h).norm();
        // Grid over the Bloch ball.
        let steps = 40;
        for a in 0..=steps {
            for b in 0..=steps {
                for e in 0..=steps {
                    let x = -1.0 + 2.0 * a as f64 / steps as f64;
                    let y = -1.0 + 2.0 * b as f64 / steps as f64;
                    let z = -1.0 + 2.0 * e as f64 / steps as f64;
                    if x * x + y * y + z * z > 1.0 {
                        continue;
                    }
                    let mut q = CMatrix::zeros(2, 2);
                    q[(0, 0)] = c(0.5 * (1.0 + z), 0.0);
                    q[(1, 1)] = c(0.5 * (1.0 - z), 0.0);
                    q[(0, 1)] = c(0.5 * x, -0.5 * y);
                    q[(1, 0)] = c(0.5 * x, 0.5 * y);
                    assert!(best <= (q - &h).norm() + 1e-12);
                }
            }
        }
    }
}
