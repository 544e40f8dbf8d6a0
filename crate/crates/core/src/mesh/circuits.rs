//! Single-photon qudit preparations realised on sub-meshes, and the
//! reference state sets that maximize the witnesses.
//!
//! Parameter vectors list the `theta`s first, then the `phi`s.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs::{evaluate_pure, InequalitySpec};
use crate::rng::Seed;
use crate::state::{c, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitFamily {
    /// `cos t |0> + e^{i p} sin t |1>`; params `[t, p]`.
    Qubit,
    /// `c1 c2 |0> + s1 c2 e^{i p1} |1> + s2 e^{i p2} |2>`; params `[t1, t2, p1, p2]`.
    Qutrit,
    /// `c2 c1 |0> + s2 c1 e^{i p1} |1> + s1 c3 e^{i p2} |2> + s1 s3 e^{i p3} |3>`;
    /// params `[t1, t2, t3, p1, p2, p3]`.
    Ququart,
    /// `s1 c2 s4 |0> + s1 c2 c4 |1> + s1 s2 e^{i p1} |2> + c1 s3 e^{i p2} |3> + c1 c3 e^{i p3} |4>`;
    /// params `[t1, t2, t3, t4, p1, p2, p3]`. Not universal: the `|0>` and
    /// `|1>` amplitudes always share a phase.
    FiveMode,
}

impl CircuitFamily {
    pub fn dim(self) -> usize {
        match self {
            CircuitFamily::Qubit => 2,
            CircuitFamily::Qutrit => 3,
            CircuitFamily::Ququart => 4,
            CircuitFamily::FiveMode => 5,
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            CircuitFamily::Qubit => 2,
            CircuitFamily::Qutrit => 4,
            CircuitFamily::Ququart => 6,
            CircuitFamily::FiveMode => 7,
        }
    }

    /// Number of amplitude angles; they precede the phases in a parameter vector.
    pub fn num_thetas(self) -> usize {
        self.dim() - 1
    }

    pub fn for_dim(d: usize) -> Result<Self> {
        match d {
            2 => Ok(CircuitFamily::Qubit),
            3 => Ok(CircuitFamily::Qutrit),
            4 => Ok(CircuitFamily::Ququart),
            5 => Ok(CircuitFamily::FiveMode),
            _ => Err(Error::param("d", format!("no preparation circuit for dimension {d}"))),
        }
    }

    pub fn prepare(self, params: &[f64]) -> Result<PureState> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("params", "angles must be finite"));
        }
        Ok(match self {
            CircuitFamily::Qubit => prepare_qubit(params[0], params[1]),
            CircuitFamily::Qutrit => prepare_qutrit(params[0], params[1], params[2], params[3]),
            CircuitFamily::Ququart => prepare_ququart(params[0], params[1], params[2], params[3], params[4], params[5]),
            CircuitFamily::FiveMode => prepare_5mode(
                [params[0], params[1], params[2], params[3]],
                [params[4], params[5], params[6]],
            ),
        })
    }

    /// Circuit angles preparing `state` up to a global phase.
    pub fn params_from_state(self, state: &PureState) -> Result<Vec<f64>> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        let a: Vec<Complex64> = state.amplitudes().iter().cloned().collect();
        let params = match self {
            CircuitFamily::Qubit => {
                let a = dephase(&a, 0);
                vec![a[1].norm().atan2(a[0].norm()), phase(a[1])]
            }
            CircuitFamily::Qutrit => {
                let a = dephase(&a, 0);
                let head = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
                vec![
                    a[1].norm().atan2(a[0].norm()),
                    a[2].norm().atan2(head),
                    phase(a[1]),
                    phase(a[2]),
                ]
            }
            CircuitFamily::Ququart => {
                let a = dephase(&a, 0);
                let head = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
                let tail = (a[2].norm_sqr() + a[3].norm_sqr()).sqrt();
                vec![
                    tail.atan2(head),
                    a[1].norm().atan2(a[0].norm()),
                    a[3].norm().atan2(a[2].norm()),
                    phase(a[1]),
                    phase(a[2]),
                    phase(a[3]),
                ]
            }
            CircuitFamily::FiveMode => {
                let pivot = if a[0].norm() >= a[1].norm() { 0 } else { 1 };
                let a = dephase(&a, pivot);
                if a[0].im.abs() > 1e-9 || a[1].im.abs() > 1e-9 {
                    return Err(Error::InvalidState(
                        "the five-mode circuit needs equal phases on |0> and |1>".into(),
                    ));
                }
                let (x0, x1) = (a[0].re, a[1].re);
                let pair = x0.hypot(x1);
                let upper = (pair * pair + a[2].norm_sqr()).sqrt();
                let lower = (a[3].norm_sqr() + a[4].norm_sqr()).sqrt();
                vec![
                    upper.atan2(lower),
                    a[2].norm().atan2(pair),
                    a[3].norm().atan2(a[4].norm()),
                    x0.atan2(x1),
                    phase(a[2]),
                    phase(a[3]),
                    phase(a[4]),
                ]
            }
        };
        Ok(params)
    }
}

/// Multiply by the global phase making `a[pivot]` real and non-negative.
fn dephase(a: &[Complex64], pivot: usize) -> Vec<Complex64> {
    let p = a[pivot];
    if p.norm() == 0.0 {
        return a.to_vec();
    }
    let g = p.conj() / p.norm();
    a.iter().map(|z| z * g).collect()
}

/// Argument in `[0, 2 pi)`; zero for a vanishing amplitude.
fn phase(z: Complex64) -> f64 {
    if z.norm() < 1e-15 {
        0.0
    } else {
        z.arg().rem_euclid(2.0 * PI)
    }
}

fn from_amplitudes(a: Vec<Complex64>) -> PureState {
    PureState::normalized(a).expect("circuit amplitudes have unit norm")
}

pub fn prepare_qubit(theta: f64, phi: f64) -> PureState {
    from_amplitudes(vec![c(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi)])
}

pub fn prepare_qutrit(th1: f64, th2: f64, ph1: f64, ph2: f64) -> PureState {
    let (s1, c1) = th1.sin_cos();
    let (s2, c2) = th2.sin_cos();
    from_amplitudes(vec![
        c(c1 * c2, 0.0),
        Complex64::from_polar(s1 * c2, ph1),
        Complex64::from_polar(s2, ph2),
    ])
}

pub fn prepare_ququart(th1: f64, th2: f64, th3: f64, ph1: f64, ph2: f64, ph3: f64) -> PureState {
    let (s1, c1) = th1.sin_cos();
    let (s2, c2) = th2.sin_cos();
    let (s3, c3) = th3.sin_cos();
    from_amplitudes(vec![
        c(c2 * c1, 0.0),
        Complex64::from_polar(s2 * c1, ph1),
        Complex64::from_polar(s1 * c3, ph2),
        Complex64::from_polar(s1 * s3, ph3),
    ])
}

pub fn prepare_5mode(th: [f64; 4], ph: [f64; 3]) -> PureState {
    let (s1, c1) = th[0].sin_cos();
    let (s2, c2) = th[1].sin_cos();
    let (s3, c3) = th[2].sin_cos();
    let (s4, c4) = th[3].sin_cos();
    from_amplitudes(vec![
        c(s1 * c2 * s4, 0.0),
        c(s1 * c2 * c4, 0.0),
        Complex64::from_polar(s1 * s2, ph[0]),
        Complex64::from_polar(c1 * s3, ph[1]),
        Complex64::from_polar(c1 * c3, ph[2]),
    ])
}

/// Qubits on the Bloch equator at the vertices of a regular pentagon
/// (`theta = pi/4`, `phi_k = 2 pi k / 5`); they maximize `h_MZI`.
pub fn pentagon_states() -> Vec<PureState> {
    (0..5)
        .map(|k| prepare_qubit(PI / 4.0, 2.0 * PI * k as f64 / 5.0))
        .collect()
}

/// Qutrits maximizing `h_4` (value 4/3): `|0>` and three states with
/// `|0>`-amplitude `sqrt(5)/3` whose remaining parts sit at 120 degrees.
pub fn h4_qutrit_states() -> Vec<PureState> {
    let a = 5f64.sqrt() / 3.0;
    let s = 1.0 / 3f64.sqrt();
    vec![
        PureState::basis(3, 0).expect("basis"),
        from_amplitudes(vec![c(a, 0.0), c(2.0 / 3.0, 0.0), c(0.0, 0.0)]),
        from_amplitudes(vec![c(a, 0.0), c(-1.0 / 3.0, 0.0), c(0.0, s)]),
        from_amplitudes(vec![c(a, 0.0), c(-1.0 / 3.0, 0.0), c(0.0, -s)]),
    ]
}

/// Maximizers of `h_n` in dimension `n - 1`: `|0>` followed by `n - 1`
/// states `sqrt(p)|0> + sqrt(1-p) |u_k>` where the `u_k` form a regular
/// simplex in the real span of `|1>..|n-2>` and `p = (2n-3)/(n-1)^2`.
pub fn hn_simplex_states(n: usize) -> Result<Vec<PureState>> {
    if n < 3 {
        return Err(Error::param("n", "need n >= 3"));
    }
    let k = n - 1;
    let d = n - 1;
    let kf = k as f64;
    let p = (2.0 * n as f64 - 3.0) / (kf * kf);
    // Regular simplex of k unit vectors in R^{k-1}: centre the standard
    // basis of R^k and express it in an orthonormal basis of the sum-zero
    // hyperplane.
    let basis = sum_zero_basis(k);
    let mut out = vec![PureState::basis(d, 0)?];
    for i in 0..k {
        let centred: Vec<f64> = (0..k).map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / kf).collect();
        let norm = centred.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut amps = vec![c(p.sqrt(), 0.0)];
        for b in &basis {
            let coord: f64 = b.iter().zip(&centred).map(|(x, y)| x * y).sum::<f64>() / norm;
            amps.push(c((1.0 - p).sqrt() * coord, 0.0));
        }
        out.push(from_amplitudes(amps));
    }
    Ok(out)
}

/// Orthonormal basis (Gram-Schmidt) of `{x in R^k : sum x = 0}`.
fn sum_zero_basis(k: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k.saturating_sub(1));
    for j in 1..k {
        let mut v = vec![0.0; k];
        v[0] = 1.0;
        v[j] = -1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|x| x / n).collect());
    }
    basis
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMaximization {
    pub inequality: String,
    pub family: CircuitFamily,
    pub value: f64,
    /// Circuit parameters of each state.
    pub params: Vec<Vec<f64>>,
    pub restarts: usize,
    pub restart_values: Vec<f64>,
}

fn family_value(spec: &InequalitySpec, family: CircuitFamily, x: &[f64]) -> Result<f64> {
    let states = x
        .chunks(family.num_params())
        .map(|p| family.prepare(p))
        .collect::<Result<Vec<_>>>()?;
    evaluate_pure(spec, &states)
}

fn ascend(
    spec: &InequalitySpec,
    family: CircuitFamily,
    mut x: Vec<f64>,
    max_iterations: usize,
) -> Result<(f64, Vec<f64>)> {
    const H: f64 = 1e-6;
    let mut value = family_value(spec, family, &x)?;
    let mut step: f64 = 0.5;
    for _ in 0..max_iterations {
        let mut grad = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut probe = x.clone();
            probe[k] += H;
            let up = family_value(spec, family, &probe)?;
            probe[k] -= 2.0 * H;
            let down = family_value(spec, family, &probe)?;
            grad[k] = (up - down) / (2.0 * H);
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2.sqrt() < 1e-8 {
            break;
        }
        let mut accepted = false;
        step = (step * 2.0).min(4.0);
        while step > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
            let v = family_value(spec, family, &trial)?;
            if v >= value + 1e-4 * step * g2 {
                x = trial;
                value = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((value, x))
}

/// Maximize `spec` over states that `family` can prepare, by gradient
/// ascent on the circuit angles from `restarts` random starts (restart `k`
/// draws from stream `k` of `seed`).
pub fn maximize_in_family(
    spec: &InequalitySpec,
    family: CircuitFamily,
    restarts: usize,
    max_iterations: usize,
    seed: Seed,
) -> Result<FamilyMaximization> {
    if restarts == 0 {
        return Err(Error::param("restarts", "need at least one restart"));
    }
    let dim = spec.n * family.num_params();
    let runs = (0..restarts as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.stream(k);
            let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            ascend(spec, family, x0, max_iterations)
        })
        .collect::<Result<Vec<_>>>()?;
    let restart_values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one restart");
    Ok(FamilyMaximization {
        inequality: spec.name.clone(),
        family,
        value: best.0,
        params: best.1.chunks(family.num_params()).map(|c| c.to_vec()).collect(),
        restarts,
        restart_values,
    })
}
