//! Thermo-optic calibration of the mesh phase shifters.
//!
//! Every MZI `i` carries one heater (also indexed `i`). The internal phase is
//! `theta_i = theta0_i + sum_j alpha_ij I_j^2 (1 + beta_j I_j^2)`, where
//! coupling between heaters and MZIs of different mesh columns is neglected.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::unitary::{cross_power, rectangular_layout};
use crate::rng::{Rng, Seed};

const TWO_PI: f64 = 2.0 * PI;
/// Minimum number of sweep points per heater.
pub const MIN_SWEEP_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// Static phase of each MZI, radians.
    pub theta0: Vec<f64>,
    /// `alpha[i][j]`: phase induced on MZI `i` by heater `j`, rad/A^2.
    pub alpha: Vec<Vec<f64>>,
    /// Second-order correction of each heater, 1/A^2.
    pub beta: Vec<f64>,
    /// Mesh column of each MZI (and of its heater).
    pub columns: Vec<usize>,
}

impl CalibrationModel {
    pub fn len(&self) -> usize {
        self.theta0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta0.len();
        for (name, len) in [
            ("alpha", self.alpha.len()),
            ("beta", self.beta.len()),
            ("columns", self.columns.len()),
        ] {
            if len != n {
                return Err(Error::param(name, format!("expected {n} entries, found {len}")));
            }
        }
        for (i, row) in self.alpha.iter().enumerate() {
            if row.len() != n {
                return Err(Error::param(
                    "alpha",
                    format!("row {i} has {} entries, expected {n}", row.len()),
                ));
            }
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() {
                    return Err(Error::param("alpha", "entries must be finite"));
                }
                if a != 0.0 && self.columns[i] != self.columns[j] {
                    return Err(Error::param(
                        "alpha",
                        format!("heater {j} couples to MZI {i} in a different column"),
                    ));
                }
            }
            if row[i] <= 0.0 {
                return Err(Error::param("alpha", format!("diagonal entry {i} must be positive")));
            }
        }
        if self.theta0.iter().chain(&self.beta).any(|x| !x.is_finite()) {
            return Err(Error::param("theta0/beta", "entries must be finite"));
        }
        Ok(())
    }
}

fn heater_response(beta: f64, current: f64) -> f64 {
    let y = current * current;
    y * (1.0 + beta * y)
}

/// Internal phase of every MZI for the given heater currents (amperes).
pub fn calibration_forward(model: &CalibrationModel, currents: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    if currents.len() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            found: currents.len(),
        });
    }
    if currents.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::param("currents", "must be finite and non-negative"));
    }
    let g: Vec<f64> = currents
        .iter()
        .zip(&model.beta)
        .map(|(&i, &b)| heater_response(b, i))
        .collect();
    Ok((0..model.len())
        .map(|i| model.theta0[i] + model.alpha[i].iter().zip(&g).map(|(a, g)| a * g).sum::<f64>())
        .collect())
}

/// Non-negative currents realizing `targets` (modulo 2 pi) on every MZI.
pub fn calibration_inverse(model: &CalibrationModel, targets: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    let n = model.len();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: targets.len(),
        });
    }
    let mut currents = vec![0.0; n];
    let mut cols: Vec<usize> = model.columns.clone();
    cols.sort_unstable();
    cols.dedup();
    for col in cols {
        let idx: Vec<usize> = (0..n).filter(|&i| model.columns[i] == col).collect();
        let k = idx.len();
        let a = DMatrix::from_fn(k, k, |r, c| model.alpha[idx[r]][idx[c]]);
        let lu = a.clone().lu();
        // Smallest lift of each target above its static phase, raised by
        // 2 pi wherever the solved heater response would be negative.
        let mut lifted: Vec<f64> = idx
            .iter()
            .map(|&i| model.theta0[i] + (targets[i] - model.theta0[i]).rem_euclid(TWO_PI))
            .collect();
        let mut g = None;
        for _ in 0..64 {
            let rhs = DVector::from_fn(k, |r, _| lifted[r] - model.theta0[idx[r]]);
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical(format!("singular coupling block in column {col}")))?;
            if sol.iter().all(|&x| x >= -1e-12) {
                g = Some(sol);
                break;
            }
            for r in 0..k {
                if sol[r] < 0.0 {
                    lifted[r] += TWO_PI;
                }
            }
        }
        let g = g.ok_or_else(|| Error::Numerical(format!("no non-negative heater solution in column {col}")))?;
        for (r, &i) in idx.iter().enumerate() {
            let gi = g[r].max(0.0);
            let beta = model.beta[i];
            let disc = 1.0 + 4.0 * beta * gi;
            if disc < 0.0 {
                return Err(Error::Numerical(format!("heater {i} cannot reach the requested phase")));
            }
            let y = 2.0 * gi / (1.0 + disc.sqrt());
            currents[i] = y.sqrt();
        }
    }
    Ok(currents)
}

/// One power reading: MZI `mzi` observed while only heater `heater` is driven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub heater: usize,
    pub mzi: usize,
    pub current: f64,
    pub cross_power: f64,
}

/// Readings of every MZI in the heater's column while the heater alone is
/// swept over `currents`. `power_noise` is the standard deviation of a
/// multiplicative Gaussian error on each reading.
pub fn simulate_sweep(
    model: &CalibrationModel,
    heater: usize,
    currents: &[f64],
    power_noise: f64,
    rng: &mut Rng,
) -> Result<Vec<SweepPoint>> {
    model.validate()?;
    if heater >= model.len() {
        return Err(Error::param("heater", format!("no heater {heater}")));
    }
    let mut out = Vec::new();
    for &current in currents {
        let mut drive = vec![0.0; model.len()];
        drive[heater] = current;
        let theta = calibration_forward(model, &drive)?;
        for mzi in 0..model.len() {
            if model.columns[mzi] != model.columns[heater] {
                continue;
            }
            let z: f64 = rng.sample(StandardNormal);
            let p = (cross_power(theta[mzi]) * (1.0 + power_noise * z)).clamp(0.0, 1.0);
            out.push(SweepPoint {
                heater,
                mzi,
                current,
                cross_power: p,
            });
        }
    }
    Ok(out)
}

/// A plausible model for an `m`-mode rectangular mesh: efficiencies near
/// 12 krad/A^2, a few percent of in-column crosstalk.
pub fn synthetic_model(m: usize, seed: Seed) -> Result<CalibrationModel> {
    let layout = rectangular_layout(m)?;
    let n = layout.len();
    let mut rng = seed.rng();
    let columns: Vec<usize> = layout.iter().map(|&(_, c)| c).collect();
    let theta0 = (0..n).map(|_| rng.random_range(0.0..TWO_PI)).collect();
    let beta = (0..n).map(|_| rng.random_range(30.0..60.0)).collect();
    let diag: Vec<f64> = (0..n).map(|_| rng.random_range(10_000.0..14_000.0)).collect();
    let alpha = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        diag[i]
                    } else if columns[i] == columns[j] {
                        diag[j] * rng.random_range(0.01..0.05)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(CalibrationModel {
        theta0,
        alpha,
        beta,
        columns,
    })
}

/// `count` currents evenly spaced on `[0, max_current]`.
pub fn sweep_currents(max_current: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| max_current * k as f64 / (count - 1).max(1) as f64)
        .collect()
}

/// Root-mean-square cross-power residual of `model` on `points`.
pub fn sweep_residual(model: &CalibrationModel, points: &[SweepPoint]) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for p in points {
        let mut drive = vec![0.0; model.len()];
        *drive
            .get_mut(p.heater)
            .ok_or_else(|| Error::param("heater", format!("no heater {}", p.heater)))? = p.current;
        let theta = calibration_forward(model, &drive)?;
        let r = cross_power(theta[p.mzi]) - p.cross_power;
        sum += r * r;
    }
    Ok((sum / points.len() as f64).sqrt())
}

/// Phase model of a single heater on its own MZI in scaled form:
/// `theta(s) = t0 + a s + b s^2` with `s = I^2 / y_max`.
#[derive(Debug, Clone, Copy)]
struct ScaledFit {
    t0: f64,
    a: f64,
    b: f64,
    cost: f64,
}

fn model_cost(s: &[f64], p: &[f64], q: &Vector3<f64>) -> f64 {
    s.iter()
        .zip(p)
        .map(|(&s, &p)| {
            let r = cross_power(q[0] + q[1] * s + q[2] * s * s) - p;
            r * r
        })
        .sum()
}

/// Levenberg-Marquardt on the cross-power residuals.
fn refine(s: &[f64], p: &[f64], start: Vector3<f64>) -> ScaledFit {
    let mut q = start;
    let mut cost = model_cost(s, p, &q);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&s, &pk) in s.iter().zip(p) {
            let theta = q[0] + q[1] * s + q[2] * s * s;
            let r = cross_power(theta) - pk;
            let d = -0.5 * theta.sin();
            let jrow = Vector3::new(d, d * s, d * s * s);
            jtj += jrow * jrow.transpose();
            jtr += jrow * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = q + step;
            let c = model_cost(s, p, &trial);
            if c < cost {
                let small = step.norm() < 1e-13 * (1.0 + q.norm());
                q = trial;
                let gain = cost - c;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !small && gain > 1e-30;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    ScaledFit {
        t0: q[0],
        a: q[1],
        b: q[2],
        cost,
    }
}

/// Unwrap `arccos(2P - 1)` assuming the phase increases along the sweep.
/// `rising` selects the branch of the first point.
fn unwrap_phases(p: &[f64], rising: bool) -> Vec<f64> {
    const HYSTERESIS: f64 = 0.2;
    let acos: Vec<f64> = p.iter().map(|&x| (2.0 * x - 1.0).clamp(-1.0, 1.0).acos()).collect();
    let mut up = rising;
    let mut turns = 0.0;
    let mut extreme = acos[0];
    let mut out = Vec::with_capacity(p.len());
    for &a in &acos {
        if up {
            if a < extreme - HYSTERESIS && extreme > PI / 2.0 {
                up = false;
                extreme = a;
            } else {
                extreme = extreme.max(a);
            }
        } else if a > extreme + HYSTERESIS && extreme < PI / 2.0 {
            up = true;
            turns += 1.0;
            extreme = a;
        } else {
            extreme = extreme.min(a);
        }
        out.push(if up {
            turns * TWO_PI + a
        } else {
            turns * TWO_PI + TWO_PI - a
        });
    }
    out
}

/// Least-squares quadratic through `(s, theta)`.
fn quadratic_fit(s: &[f64], theta: &[f64]) -> Option<Vector3<f64>> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (&s, &t) in s.iter().zip(theta) {
        let row = Vector3::new(1.0, s, s * s);
        ata += row * row.transpose();
        atb += row * t;
    }
    ata.lu().solve(&atb)
}

struct DiagonalFit {
    theta0: f64,
    alpha: f64,
    beta: f64,
}

fn fit_diagonal(heater: usize, points: &[(f64, f64)]) -> Result<DiagonalFit> {
    let coverage = |reason: String| Error::InsufficientCoverage { heater, reason };
    if points.len() < MIN_SWEEP_POINTS {
        return Err(coverage(format!(
            "{} sweep points, at least {MIN_SWEEP_POINTS} are needed",
            points.len()
        )));
    }
    let y_max = points.iter().map(|(i, _)| i * i).fold(0.0, f64::max);
    if y_max <= 0.0 {
        return Err(coverage("all sweep currents are zero".into()));
    }
    let s: Vec<f64> = points.iter().map(|(i, _)| i * i / y_max).collect();
    let p: Vec<f64> = points.iter().map(|(_, p)| *p).collect();
    let p_span = p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min);
    if p_span < 0.5 {
        return Err(coverage(format!(
            "cross power only varies by {p_span:.3}; the heater does not reach a full fringe"
        )));
    }
    let mut best: Option<ScaledFit> = None;
    let mut best_span = 0.0f64;
    for rising in [true, false] {
        let theta = unwrap_phases(&p, rising);
        best_span = best_span.max(theta[theta.len() - 1] - theta[0]);
        let Some(start) = quadratic_fit(&s, &theta) else {
            continue;
        };
        let fit = refine(&s, &p, start);
        if best.is_none_or(|b| fit.cost < b.cost) {
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| Error::Numerical(format!("calibration fit failed for heater {heater}")))?;
    let induced = fit.a + fit.b;
    if best_span < TWO_PI * 0.98 || induced.abs() < TWO_PI * 0.98 {
        return Err(coverage(format!(
            "sweep spans {:.3} rad of induced phase, at least 2 pi is needed",
            induced.abs().max(best_span)
        )));
    }
    if fit.a <= 0.0 {
        return Err(Error::Numerical(format!(
            "heater {heater} fit gave a non-positive efficiency"
        )));
    }
    Ok(DiagonalFit {
        theta0: fit.t0.rem_euclid(TWO_PI),
        alpha: fit.a / y_max,
        beta: fit.b / (fit.a * y_max),
    })
}

/// Fit of the single coupling `alpha_ij` from the readings of MZI `i` while
/// heater `j` is swept, with `theta0_i` and `beta_j` already known.
fn fit_coupling(theta0: f64, beta: f64, points: &[(f64, f64)]) -> f64 {
    let g: Vec<f64> = points.iter().map(|(i, _)| heater_response(beta, *i)).collect();
    let g_max = g.iter().cloned().fold(0.0, f64::max);
    if g_max <= 0.0 {
        return 0.0;
    }
    let u: Vec<f64> = g.iter().map(|x| x / g_max).collect();
    let cost = |c: f64| -> f64 {
        u.iter()
            .zip(points)
            .map(|(&u, (_, p))| {
                let r = cross_power(theta0 + c * u) - p;
                r * r
            })
            .sum()
    };
    // `c` is the phase induced at the largest drive.
    let mut c = 0.0;
    let mut best = cost(0.0);
    let steps = 1200;
    for k in 0..=steps {
        let trial = -3.0 * PI + 6.0 * PI * k as f64 / steps as f64;
        let v = cost(trial);
        if v < best {
            best = v;
            c = trial;
        }
    }
    for _ in 0..100 {
        let (mut grad, mut curv) = (0.0, 0.0);
        for (&u, (_, p)) in u.iter().zip(points) {
            let theta = theta0 + c * u;
            let r = cross_power(theta) - p;
            let d = -0.5 * theta.sin() * u;
            grad += d * r;
            curv += d * d;
        }
        if curv <= 0.0 {
            break;
        }
        let step = -grad / curv;
        if cost(c + step) > cost(c) {
            break;
        }
        c += step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    c / g_max
}

/// Fit a [`CalibrationModel`] to heater sweeps. `columns` gives the mesh
/// column of each MZI; every heater needs its own sweep of at least
/// [`MIN_SWEEP_POINTS`] readings covering at least 2 pi of phase. Readings of
/// other MZIs in the heater's column determine the crosstalk; readings across
/// columns are ignored.
pub fn calibration_fit(points: &[SweepPoint], columns: &[usize]) -> Result<CalibrationModel> {
    let n = columns.len();
    if let Some(p) = points.iter().find(|p| p.heater >= n || p.mzi >= n) {
        return Err(Error::param(
            "points",
            format!("reading for heater {} / MZI {} outside the layout", p.heater, p.mzi),
        ));
    }
    if points
        .iter()
        .any(|p| !p.current.is_finite() || p.current < 0.0 || !p.cross_power.is_finite())
    {
        return Err(Error::param(
            "points",
            "currents must be finite and non-negative, powers finite",
        ));
    }
    let series = |heater: usize, mzi: usize| -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.heater == heater && p.mzi == mzi)
            .map(|p| (p.current, p.cross_power))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let mut theta0 = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut alpha = vec![vec![0.0; n]; n];
    for j in 0..n {
        let fit = fit_diagonal(j, &series(j, j))?;
        theta0[j] = fit.theta0;
        alpha[j][j] = fit.alpha;
        beta[j] = fit.beta;
    }
    for j in 0..n {
        for i in 0..n {
            if i == j || columns[i] != columns[j] {
                continue;
            }
            let s = series(j, i);
            if s.len() >= 3 {
                alpha[i][j] = fit_coupling(theta0[i], beta[j], &s);
            }
        }
    }
    let model = CalibrationModel {
        theta0,
        alpha,
        beta,
        columns: columns.to_vec(),
    };
    model.validate()?;
    Ok(model)
}

/// Readings for every heater of `model`, `count` evenly spaced currents up to
/// `max_current` each.
pub fn simulate_all_sweeps(
    model: &CalibrationModel,
    max_current: f64,
    count: usize,
    power_noise: f64,
    seed: Seed,
) -> Result<Vec<SweepPoint>> {
    let currents = sweep_currents(max_current, count);
    let mut out = Vec::new();
    for heater in 0..model.len() {
        let mut rng = seed.stream(heater as u64);
        out.extend(simulate_sweep(model, heater, &currents, power_noise, &mut rng)?);
    }
    Ok(out)
}

/// Largest recovery errors of `fit` against `truth`: `theta0` (rad,
/// modulo 2 pi), relative diagonal `alpha`, relative `beta`, and crosstalk
/// relative to the driving heater's own efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryError {
    pub theta0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub crosstalk: f64,
}

pub fn recovery_error(truth: &CalibrationModel, fit: &CalibrationModel) -> Result<RecoveryError> {
    if truth.len() != fit.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: fit.len(),
        });
    }
    let n = truth.len();
    let mut e = RecoveryError {
        theta0: 0.0,
        alpha: 0.0,
        beta: 0.0,
        crosstalk: 0.0,
    };
    for i in 0..n {
        let d = (fit.theta0[i] - truth.theta0[i]).rem_euclid(TWO_PI);
        e.theta0 = e.theta0.max(d.min(TWO_PI - d));
        e.alpha = e
            .alpha
            .max(((fit.alpha[i][i] - truth.alpha[i][i]) / truth.alpha[i][i]).abs());
        e.beta = e.beta.max(((fit.beta[i] - truth.beta[i]) / truth.beta[i]).abs());
        for j in 0..n {
            if i != j {
                e.crosstalk = e
                    .crosstalk
                    .max(((fit.alpha[i][j] - truth.alpha[i][j]) / truth.alpha[j][j]).abs());
            }
        }
    }
    Ok(e)
}
