//! Quantum interrogation in a Mach-Zehnder interferometer and the
//! robustness of its contextual advantage to depolarizing noise.
//!
//! A beam splitter with reflectivity `r` prepares `|theta> = cos(theta)|0>
//! + sin(theta)|1>` with `r = cos^2(theta)`. The efficiency of detecting the
//! object without absorption is `eta = p_succ / (p_succ + p_abs)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{depolarize, overlap, DensityMatrix, PureState};

/// Simplex-embeddability robustness of the experimental hexagon fragment.
/// Reported for reference only; it is not computed here.
pub const GPT_ROBUSTNESS_EXPERIMENT: f64 = 0.1121;
/// Same quantity for the ideal fragment; reference only.
pub const GPT_ROBUSTNESS_IDEAL: f64 = 0.333;

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param(name, format!("{x} is outside [0, 1]")));
    }
    Ok(())
}

/// Reflectivity of the splitter preparing `|theta>`.
pub fn theta_to_r(theta: f64) -> f64 {
    theta.cos().powi(2)
}

/// Preparation angle in `[0, pi/2]` with `cos^2(theta) = r`.
pub fn r_to_theta(r: f64) -> Result<f64> {
    check_unit("r", r)?;
    Ok(r.sqrt().acos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterrogationPoint {
    pub r: f64,
    pub p_succ: f64,
    pub p_abs: f64,
    pub eta: f64,
}

/// Propagate one photon through splitter, object and inverse splitter.
///
/// The splitter is `[[sqrt(r), i sqrt(1-r)], [i sqrt(1-r), sqrt(r)]]`; the
/// object sits in arm 1 and absorbs whatever reaches it. Without the object
/// the photon always leaves through port 0, so a click in port 1 reveals
/// the object.
pub fn interrogation_point(r: f64) -> Result<InterrogationPoint> {
    check_unit("r", r)?;
    let t = Complex64::new(r.sqrt(), 0.0);
    let x = Complex64::new(0.0, (1.0 - r).sqrt());
    let arm = [t, x];
    let p_abs = arm[1].norm_sqr();
    // Second splitter is the adjoint of the first.
    let out1 = x.conj() * arm[0];
    let p_succ = out1.norm_sqr();
    let denom = p_succ + p_abs;
    let eta = if denom > 0.0 { p_succ / denom } else { eta_ideal(r)? };
    Ok(InterrogationPoint { r, p_succ, p_abs, eta })
}

/// Ideal efficiency `r(1-r) / (r(1-r) - r + 1)`, which simplifies to
/// `r / (1 + r)`. At `r = 1` the value is the limit `1/2`.
pub fn eta_ideal(r: f64) -> Result<f64> {
    check_unit("r", r)?;
    let num = r * (1.0 - r);
    let den = num - r + 1.0;
    if den <= 0.0 {
        return Ok(0.5);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Efficiency with a reflectivity mismatch `eps` between the two splitters
/// and dark-count ratios `n1`, `n2`.
pub fn eta_noisy(r: f64, eps: f64, n1: f64, n2: f64, branch: Branch) -> Result<f64> {
    check_unit("r", r)?;
    for (name, v) in [("eps", eps), ("n1", n1), ("n2", n2)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::param(name, format!("{v} must be finite and non-negative")));
        }
    }
    let core = r * (1.0 - (1.0 + branch.sign() * eps) * r);
    let den = core - r + 1.0 + n1 + n2;
    if den <= 0.0 {
        return Err(Error::Numerical(format!(
            "denominator {den:.3e} is not positive; parameters are outside the model's range"
        )));
    }
    Ok((core + n1) / den)
}

fn rebit(angle: f64) -> DensityMatrix {
    PureState::from_real(&[angle.cos(), angle.sin()])
        .expect("unit rebit")
        .density()
}

fn noisy_rebit(angle: f64, nu: f64) -> Result<DensityMatrix> {
    depolarize(&rebit(angle), nu)
}

/// `1 - Tr(rho rho)` for a depolarized pure qubit: `nu - nu^2/2`.
pub fn epsilon(nu: f64) -> Result<f64> {
    check_unit("nu", nu)?;
    Ok(nu - nu * nu / 2.0)
}

/// Quantum efficiency `q / (q + 1)` with `q = Tr(rho_0 rho_theta)` after
/// depolarization.
pub fn eta_quantum_depolarized(theta: f64, nu: f64) -> Result<f64> {
    check_unit("nu", nu)?;
    let q = overlap(&noisy_rebit(0.0, nu)?, &noisy_rebit(theta, nu)?)?;
    Ok(q / (q + 1.0))
}

/// Largest efficiency reachable by a noncontextual model that reproduces
/// the depolarized statistics:
///
/// ```text
/// (1 + Tr(rho_theta rho_-theta) - Tr(rho_0 rho_-theta) + 3 eps(nu)) / (Tr(rho_0 rho_theta) + 1)
/// ```
pub fn eta_nc_bound(theta: f64, nu: f64) -> Result<f64> {
    check_unit("nu", nu)?;
    let r0 = noisy_rebit(0.0, nu)?;
    let rp = noisy_rebit(theta, nu)?;
    let rm = noisy_rebit(-theta, nu)?;
    let num = 1.0 + overlap(&rp, &rm)? - overlap(&r0, &rm)? + 3.0 * epsilon(nu)?;
    Ok(num / (overlap(&r0, &rp)? + 1.0))
}

/// Smallest efficiency that still certifies an advantage at noise `nu`:
/// the lower of the quantum efficiency and the noncontextual bound.
pub fn worst_case_efficiency(theta: f64, nu: f64) -> Result<f64> {
    Ok(eta_quantum_depolarized(theta, nu)?.min(eta_nc_bound(theta, nu)?))
}

fn gap(theta: f64, nu: f64) -> Result<f64> {
    Ok(eta_quantum_depolarized(theta, nu)? - eta_nc_bound(theta, nu)?)
}

/// Noise level at which the quantum efficiency meets the noncontextual
/// bound, by bisection to `1e-10` in `nu`.
pub fn crossover_nu(theta: f64) -> Result<f64> {
    if gap(theta, 0.0)? <= 0.0 {
        return Err(Error::NoContextualGap { theta });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if gap(theta, hi)? >= 0.0 {
        return Err(Error::Numerical(format!(
            "gap does not close on [0, 1] for theta = {theta}"
        )));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if gap(theta, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub nu: f64,
    pub eta_quantum: f64,
    pub eta_nc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub theta: f64,
    pub points: Vec<CurvePoint>,
    /// `None` when there is no gap at `nu = 0`.
    pub crossover_nu: Option<f64>,
}

pub fn robustness_curve(theta: f64, nus: &[f64]) -> Result<RobustnessCurve> {
    let points = nus
        .iter()
        .map(|&nu| {
            Ok(CurvePoint {
                nu,
                eta_quantum: eta_quantum_depolarized(theta, nu)?,
                eta_nc: eta_nc_bound(theta, nu)?,
            })
        })
        .collect::<Result<_>>()?;
    let crossover_nu = match crossover_nu(theta) {
        Ok(v) => Some(v),
        Err(Error::NoContextualGap { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(RobustnessCurve {
        theta,
        points,
        crossover_nu,
    })
}

/// Six depolarized rebit preparations
/// `(|0>, |theta>, |-theta>, |1>, |theta_perp>, |-theta_perp>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexagonFragment {
    pub theta: f64,
    pub nu: f64,
    pub states: Vec<DensityMatrix>,
    /// `max_i ||(rho_i + rho_{i+3})/2 - I/2||_F`.
    pub equivalence_deviation: f64,
}

impl HexagonFragment {
    pub fn equivalences_hold(&self, tol: f64) -> bool {
        self.equivalence_deviation <= tol
    }
}

pub fn hexagon(theta: f64, nu: f64) -> Result<HexagonFragment> {
    check_unit("nu", nu)?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let angles = [0.0, theta, -theta, half_pi, theta + half_pi, -theta + half_pi];
    let states = angles.iter().map(|&a| noisy_rebit(a, nu)).collect::<Result<Vec<_>>>()?;
    let states: Vec<DensityMatrix> = states;
    Ok(HexagonFragment {
        theta,
        nu,
        equivalence_deviation: equivalence_deviation(&states)?,
        states,
    })
}

/// Deviation of each antipodal pair from the maximally mixed state; the
/// input must hold six qubit states.
pub fn equivalence_deviation(states: &[DensityMatrix]) -> Result<f64> {
    if states.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            found: states.len(),
        });
    }
    let mixed = DensityMatrix::maximally_mixed(2)?;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        if states[i].dim() != 2 || states[i + 3].dim() != 2 {
            return Err(Error::param("states", "the hexagon fragment consists of qubit states"));
        }
        let avg = (states[i].entries() + states[i + 3].entries()).scale(0.5);
        worst = worst.max((avg - mixed.entries()).norm());
    }
    Ok(worst)
}

/// `T10 + T20 - T21 - T03 - T14 - T25` with `Tij = Tr(rho_i rho_j)`.
pub fn h3_robust(frag: &HexagonFragment) -> Result<f64> {
    let s = &frag.states;
    if s.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            found: s.len(),
        });
    }
    let t = |i: usize, j: usize| overlap(&s[i], &s[j]);
    Ok(t(1, 0)? + t(2, 0)? - t(2, 1)? - t(0, 3)? - t(1, 4)? - t(2, 5)?)
}
