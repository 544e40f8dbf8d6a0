//! Rectangular MZI meshes: composition and Clements decomposition.
//!
//! A cell on modes `(k, k+1)` applies an external phase `phi` to mode `k`,
//! a balanced splitter, an internal phase `theta` on mode `k` and a second
//! splitter:
//!
//! ```text
//! T(theta, phi) = B diag(e^{i theta}, 1) B diag(e^{i phi}, 1),   B = [[1, i], [i, 1]] / sqrt(2)
//!               = i e^{i theta/2} [[sin(theta/2) e^{i phi}, cos(theta/2)],
//!                                  [cos(theta/2) e^{i phi}, -sin(theta/2)]]
//! ```
//!
//! so the cross-port power is `(1 + cos theta)/2`: `theta = pi` is a mirror
//! (bar) and `theta = 0` a full crossing.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{c, CMatrix};

/// Reduce an angle to `[0, 2 pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// The 2x2 cell transfer matrix.
pub fn mzi(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    let g = c(0.0, 1.0) * Complex64::from_polar(1.0, theta / 2.0);
    let e = Complex64::from_polar(1.0, phi);
    [[g * e * s, g * co], [g * e * co, -g * s]]
}

/// Power leaving the cross port for light entering one input.
pub fn cross_power(theta: f64) -> f64 {
    0.5 * (1.0 + theta.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshCell {
    /// Upper mode of the pair the cell acts on.
    pub row: usize,
    pub column: usize,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub modes: usize,
    /// Cells in the order light meets them.
    pub cells: Vec<MeshCell>,
    pub output_phases: Option<Vec<f64>>,
}

impl MeshConfig {
    /// All cells set to `(theta, phi)` on the full rectangular layout.
    pub fn uniform(modes: usize, theta: f64, phi: f64) -> Result<Self> {
        let cells = rectangular_layout(modes)?
            .into_iter()
            .map(|(row, column)| MeshCell {
                row,
                column,
                theta,
                phi,
            })
            .collect();
        Ok(Self {
            modes,
            cells,
            output_phases: None,
        })
    }

    /// Checks that the cells fill the rectangular layout exactly once and
    /// are listed in an order compatible with their columns.
    pub fn validate(&self) -> Result<()> {
        let m = self.modes;
        if m < 2 {
            return Err(Error::InvalidLayout(format!(
                "a mesh needs at least two modes, got {m}"
            )));
        }
        if self.cells.len() != m * (m - 1) / 2 {
            return Err(Error::InvalidLayout(format!(
                "{} cells given, a {m}-mode rectangular mesh has {}",
                self.cells.len(),
                m * (m - 1) / 2
            )));
        }
        let mut seen = vec![false; m * m];
        let mut depth = vec![0usize; m];
        for cell in &self.cells {
            if cell.row + 1 >= m || cell.column >= m || (cell.row + cell.column) % 2 != 0 {
                return Err(Error::InvalidLayout(format!(
                    "cell at row {} column {} is not in the rectangular layout",
                    cell.row, cell.column
                )));
            }
            if !(cell.theta.is_finite() && cell.phi.is_finite()) {
                return Err(Error::InvalidLayout("non-finite cell angle".into()));
            }
            let slot = cell.row * m + cell.column;
            if seen[slot] {
                return Err(Error::InvalidLayout(format!(
                    "duplicate cell at row {} column {}",
                    cell.row, cell.column
                )));
            }
            seen[slot] = true;
            if depth[cell.row] > cell.column || depth[cell.row + 1] > cell.column {
                return Err(Error::InvalidLayout(format!(
                    "cell at row {} column {} is listed after a later cell on the same modes",
                    cell.row, cell.column
                )));
            }
            depth[cell.row] = cell.column + 1;
            depth[cell.row + 1] = cell.column + 1;
        }
        if let Some(ph) = &self.output_phases {
            if ph.len() != m {
                return Err(Error::InvalidLayout(format!(
                    "{} output phases for {m} modes",
                    ph.len()
                )));
            }
        }
        Ok(())
    }

    /// Reduce every stored angle to `[0, 2 pi)`.
    pub fn wrapped(mut self) -> Self {
        for cell in &mut self.cells {
            cell.theta = wrap_angle(cell.theta);
            cell.phi = wrap_angle(cell.phi);
        }
        if let Some(ph) = &mut self.output_phases {
            for p in ph.iter_mut() {
                *p = wrap_angle(*p);
            }
        }
        self
    }
}

/// `(row, column)` of every cell of the `m`-mode rectangular mesh, column by column.
pub fn rectangular_layout(m: usize) -> Result<Vec<(usize, usize)>> {
    if m < 2 {
        return Err(Error::InvalidLayout(format!(
            "a mesh needs at least two modes, got {m}"
        )));
    }
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for column in 0..m {
        let mut row = column % 2;
        while row + 1 < m {
            out.push((row, column));
            row += 2;
        }
    }
    Ok(out)
}

fn apply_left(u: &mut CMatrix, k: usize, t: &[[Complex64; 2]; 2]) {
    for col in 0..u.ncols() {
        let a = u[(k, col)];
        let b = u[(k + 1, col)];
        u[(k, col)] = t[0][0] * a + t[0][1] * b;
        u[(k + 1, col)] = t[1][0] * a + t[1][1] * b;
    }
}

/// `u <- u * t^dagger` on columns `(k, k+1)`.
fn apply_right_inverse(u: &mut CMatrix, k: usize, t: &[[Complex64; 2]; 2]) {
    for row in 0..u.nrows() {
        let a = u[(row, k)];
        let b = u[(row, k + 1)];
        u[(row, k)] = a * t[0][0].conj() + b * t[0][1].conj();
        u[(row, k + 1)] = a * t[1][0].conj() + b * t[1][1].conj();
    }
}

pub fn compose(config: &MeshConfig) -> Result<CMatrix> {
    config.validate()?;
    let m = config.modes;
    let mut u = CMatrix::identity(m, m);
    for cell in &config.cells {
        apply_left(&mut u, cell.row, &mzi(cell.theta, cell.phi));
    }
    if let Some(ph) = &config.output_phases {
        for (k, &p) in ph.iter().enumerate() {
            let e = Complex64::from_polar(1.0, p);
            for col in 0..m {
                u[(k, col)] *= e;
            }
        }
    }
    Ok(u)
}

/// `||u^dagger u - I||_F`.
pub fn unitary_deviation(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).norm()
}

pub fn check_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    let deviation = unitary_deviation(u);
    if !(deviation <= tol) {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

/// Below this modulus an entry is treated as already nulled.
const ZERO: f64 = 1e-13;

/// Angles that null `u[r, k]` by `u <- u T^dagger` on columns `(k, k+1)`.
fn null_from_right(a: Complex64, b: Complex64) -> (f64, f64) {
    if a.norm() < ZERO {
        return (PI, 0.0);
    }
    if b.norm() < ZERO {
        return (0.0, 0.0);
    }
    (2.0 * b.norm().atan2(a.norm()), (-a / b).arg())
}

/// Angles that null `u[k+1, col]` by `u <- T u` on rows `(k, k+1)`.
fn null_from_left(a: Complex64, b: Complex64) -> (f64, f64) {
    if b.norm() < ZERO {
        return (PI, 0.0);
    }
    if a.norm() < ZERO {
        return (0.0, 0.0);
    }
    (2.0 * a.norm().atan2(b.norm()), (b / a).arg())
}

/// Clements decomposition of a unitary into the rectangular mesh plus
/// output phases. The identity maps to every cell at `theta = pi`.
pub fn decompose(u: &CMatrix) -> Result<MeshConfig> {
    let m = u.nrows();
    if m < 2 || u.ncols() != m {
        return Err(Error::InvalidLayout(format!(
            "need a square matrix with at least two modes, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    check_unitary(u, 1e-10 * (m as f64).sqrt())?;
    let mut w = u.clone();
    // (k, theta, phi) in the order they were found.
    let mut right: Vec<(usize, f64, f64)> = Vec::new();
    let mut left: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..m - 1 {
        if i % 2 == 0 {
            for j in 0..=i {
                let r = m - 1 - j;
                let k = i - j;
                let (theta, phi) = null_from_right(w[(r, k)], w[(r, k + 1)]);
                apply_right_inverse(&mut w, k, &mzi(theta, phi));
                right.push((k, theta, phi));
            }
        } else {
            for j in 1..=i + 1 {
                let k = m + j - i - 3;
                let col = j - 1;
                let (theta, phi) = null_from_left(w[(k, col)], w[(k + 1, col)]);
                apply_left(&mut w, k, &mzi(theta, phi));
                left.push((k, theta, phi));
            }
        }
    }
    // Now w = L u R^dagger is diagonal, so u = L^dagger D R. Move each
    // L^dagger through D: T^dagger diag(d1, d2) = diag(e1, e2) T(theta, phi').
    let mut d: Vec<Complex64> = (0..m).map(|k| w[(k, k)]).collect();
    let mut moved: Vec<(usize, f64, f64)> = Vec::with_capacity(left.len());
    for &(k, theta, phi) in left.iter().rev() {
        let (d1, d2) = (d[k], d[k + 1]);
        let phi_new = (d1 / d2).arg();
        d[k] = -Complex64::from_polar(1.0, -(theta + phi)) * d2;
        d[k + 1] = -Complex64::from_polar(1.0, -theta) * d2;
        moved.push((k, theta, phi_new));
    }
    // Light order: R_1 .. R_q, then the moved cells in processing order
    // (the last left cell comes first), then D.
    let sequence: Vec<(usize, f64, f64)> = right.into_iter().chain(moved).collect();
    let mut depth = vec![0usize; m];
    let mut cells = Vec::with_capacity(sequence.len());
    for (k, theta, phi) in sequence {
        let column = depth[k].max(depth[k + 1]);
        depth[k] = column + 1;
        depth[k + 1] = column + 1;
        cells.push(MeshCell {
            row: k,
            column,
            theta,
            phi,
        });
    }
    cells.sort_by_key(|cell| (cell.column, cell.row));
    let config = MeshConfig {
        modes: m,
        cells,
        output_phases: Some(d.iter().map(|z| z.arg()).collect()),
    }
    .wrapped();
    config.validate()?;
    Ok(config)
}

/// `(1/m) sum_ij |t_ij| |t_exp_ij|`, the overlap of the two moduli patterns.
pub fn fidelity(t: &CMatrix, t_exp: &CMatrix) -> Result<f64> {
    if t.shape() != t_exp.shape() {
        return Err(Error::DimensionMismatch {
            expected: t.nrows(),
            found: t_exp.nrows(),
        });
    }
    if t.nrows() != t.ncols() || t.nrows() == 0 {
        return Err(Error::param("t", "fidelity needs square non-empty matrices"));
    }
    let m = t.nrows() as f64;
    Ok(t.iter()
        .zip(t_exp.iter())
        .map(|(a, b)| a.norm() * b.norm())
        .sum::<f64>()
        / m)
}
