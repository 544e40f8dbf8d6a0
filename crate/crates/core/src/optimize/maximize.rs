//! Multi-start local ascent of an edge functional over tuples of pure states.
//!
//! The objective `f = sum_{i<j} w_ij |<psi_i|psi_j>|^2` lives on a product
//! of unit spheres in `C^d`. Each restart runs Riemannian gradient ascent
//! with Armijo step halving and then polishes with exact block updates:
//! with all other states fixed, `f` is linear in `|psi_i><psi_i|`, so the
//! best `psi_i` is the top eigenvector of `M_i = sum_j w_ij |psi_j><psi_j|`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{evaluate_pure, InequalitySpec};
use crate::rng::{Rng, Seed};
use crate::state::{haar_random_pure_with, top_eigenvector, CMatrix, CVector, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizeConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Riemannian gradient norm at which ascent stops.
    pub grad_tol: f64,
    pub max_polish_sweeps: usize,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        Self {
            restarts: 200,
            max_iterations: 2_000,
            grad_tol: 1e-9,
            max_polish_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizationResult {
    pub inequality: String,
    pub n: usize,
    pub d: usize,
    pub value: f64,
    pub states: Vec<PureState>,
    pub restarts_used: usize,
    /// Index of the first restart that reached `value`.
    pub best_restart: usize,
    pub converged: bool,
    /// Final value of every restart, in restart order.
    pub restart_values: Vec<f64>,
}

struct Local {
    value: f64,
    states: Vec<CVector>,
    converged: bool,
}

pub fn maximize_pure(spec: &InequalitySpec, d: usize, restarts: usize, seed: Seed) -> Result<MaximizationResult> {
    let config = MaximizeConfig {
        restarts,
        ..MaximizeConfig::default()
    };
    maximize_pure_with(spec, d, &config, seed)
}

pub fn maximize_pure_with(
    spec: &InequalitySpec,
    d: usize,
    config: &MaximizeConfig,
    seed: Seed,
) -> Result<MaximizationResult> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if config.restarts == 0 {
        return Err(Error::param("restarts", "need at least one restart"));
    }
    let weights = spec.weight_matrix();
    let locals: Vec<Local> = (0..config.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.stream(k as u64);
            local_ascent(&weights, d, config, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, local) in locals.iter().enumerate() {
        if local.value > locals[best].value {
            best = k;
        }
    }
    let winner = &locals[best];
    let states: Vec<PureState> = winner
        .states
        .iter()
        .map(|v| PureState::normalized(v.iter().cloned().collect()))
        .collect::<Result<_>>()?;
    let value = evaluate_pure(spec, &states)?;
    Ok(MaximizationResult {
        inequality: spec.name.clone(),
        n: spec.n,
        d,
        value,
        states,
        restarts_used: config.restarts,
        best_restart: best,
        converged: winner.converged,
        restart_values: locals.iter().map(|l| l.value).collect(),
    })
}

fn objective(weights: &[Vec<f64>], psi: &[CVector]) -> f64 {
    let n = psi.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let w = weights[i][j];
            if w != 0.0 {
                total += w * psi[i].dotc(&psi[j]).norm_sqr();
            }
        }
    }
    total
}

/// `M_i psi_i` for every `i`, computed through the Gram matrix.
fn m_times_psi(weights: &[Vec<f64>], psi: &[CVector]) -> Vec<CVector> {
    let n = psi.len();
    let d = psi[0].len();
    (0..n)
        .map(|i| {
            let mut out = CVector::zeros(d);
            for j in 0..n {
                let w = weights[i][j];
                if j != i && w != 0.0 {
                    let g: Complex64 = psi[j].dotc(&psi[i]);
                    out.axpy(Complex64::new(w, 0.0) * g, &psi[j], Complex64::new(1.0, 0.0));
                }
            }
            out
        })
        .collect()
}

fn local_ascent(weights: &[Vec<f64>], d: usize, config: &MaximizeConfig, rng: &mut Rng) -> Result<Local> {
    let n = weights.len();
    let mut psi: Vec<CVector> = (0..n)
        .map(|_| haar_random_pure_with(d, rng).map(|s| s.amplitudes().clone()))
        .collect::<Result<_>>()?;
    let mut value = objective(weights, &psi);
    let mut step = 0.5;
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let mpsi = m_times_psi(weights, &psi);
        // Riemannian gradient: the Euclidean gradient 2 M_i psi_i projected
        // onto the tangent space of the sphere.
        let grad: Vec<CVector> = psi
            .iter()
            .zip(&mpsi)
            .map(|(p, mp)| {
                let rq = p.dotc(mp).re;
                (mp - p.scale(rq)).scale(2.0)
            })
            .collect();
        let gnorm_sq: f64 = grad.iter().map(|g| g.norm_squared()).sum();
        if gnorm_sq.sqrt() < config.grad_tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        let mut t = step * 2.0;
        while t > 1e-14 {
            let trial: Vec<CVector> = psi
                .iter()
                .zip(&grad)
                .map(|(p, g)| {
                    let v = p + g.scale(t);
                    let nrm = v.norm();
                    v.unscale(nrm)
                })
                .collect();
            let tv = objective(weights, &trial);
            if tv >= value + 1e-4 * t * gnorm_sq {
                psi = trial;
                value = tv;
                step = t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // Block polish: replace each state by the top eigenvector of M_i.
    for _ in 0..config.max_polish_sweeps {
        let before = value;
        for i in 0..n {
            let mut m = CMatrix::zeros(d, d);
            for j in 0..n {
                let w = weights[i][j];
                if j != i && w != 0.0 {
                    m += (&psi[j] * psi[j].adjoint()).scale(w);
                }
            }
            let (_, v) = top_eigenvector(&m)?;
            let current = psi[i].dotc(&(&m * &psi[i])).re;
            let candidate = v.dotc(&(&m * &v)).re;
            if candidate > current {
                psi[i] = v;
            }
        }
        value = objective(weights, &psi);
        if value - before <= 1e-14 {
            converged = true;
            break;
        }
    }
    if !value.is_finite() {
        return Err(Error::Numerical("ascent produced a non-finite value".into()));
    }
    Ok(Local {
        value,
        states: psi,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{make_h_mzi, make_hn};

    #[test]
    fn table_examples() {
        let h3 = maximize_pure(&make_hn(3).unwrap(), 2, 20, Seed(1)).unwrap();
        assert!((h3.value - 1.25).abs() < 1e-3);
        let h5 = maximize_pure(&make_hn(5).unwrap(), 4, 40, Seed(1)).unwrap();
        assert!((h5.value - 1.375).abs() < 1e-3);
        let h6 = maximize_pure(&make_hn(6).unwrap(), 4, 40, Seed(1)).unwrap();
        assert!((h6.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pentagon_maximum() {
        let r = maximize_pure(&make_h_mzi(), 2, 40, Seed(5)).unwrap();
        assert!((r.value - 5.0 * 5f64.sqrt() / 4.0).abs() < 1e-6);
    }

    #[test]
    fn value_matches_states_and_is_deterministic() {
        let spec = make_hn(4).unwrap();
        let a = maximize_pure(&spec, 3, 10, Seed(9)).unwrap();
        let b = maximize_pure(&spec, 3, 10, Seed(9)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!((evaluate_pure(&spec, &a.states).unwrap() - a.value).abs() < 1e-8);
        assert_eq!(a.restart_values.len(), 10);
        assert_eq!(
            a.restart_values[a.best_restart],
            a.restart_values.iter().cloned().fold(f64::MIN, f64::max)
        );
    }

    #[test]
    fn input_validation() {
        let spec = make_hn(3).unwrap();
        assert!(maximize_pure(&spec, 0, 1, Seed(0)).is_err());
        assert!(maximize_pure(&spec, 2, 0, Seed(0)).is_err());
    }

    #[test]
    fn one_dimension_is_trivial() {
        let r = maximize_pure(&make_hn(5).unwrap(), 1, 3, Seed(0)).unwrap();
        // All overlaps are one: 4 - 6.
        assert!((r.value + 2.0).abs() < 1e-12);
    }
}
