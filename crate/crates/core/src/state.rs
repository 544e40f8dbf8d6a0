//! Quantum-state primitives.
//!
//! [`PureState`] is a ray in `C^d` (global phase is irrelevant: compare with
//! [`PureState::same_ray`]), [`DensityMatrix`] a unit-trace positive
//! semidefinite Hermitian matrix. The two-state overlap `Tr(a b)` is the
//! only invariant the witnesses in this crate consume.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Rng, Seed};
use crate::tolerances::Tolerances;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Unit-norm amplitude vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PureStateRepr", into = "PureStateRepr")]
pub struct PureState {
    amplitudes: CVector,
}

#[derive(Serialize, Deserialize)]
struct PureStateRepr {
    amplitudes: Vec<[f64; 2]>,
}

impl TryFrom<PureStateRepr> for PureState {
    type Error = Error;

    fn try_from(repr: PureStateRepr) -> Result<Self> {
        let amps: Vec<Complex64> = repr.amplitudes.iter().map(|&[re, im]| c(re, im)).collect();
        PureState::new(amps)
    }
}

impl From<PureState> for PureStateRepr {
    fn from(state: PureState) -> Self {
        PureStateRepr {
            amplitudes: state.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl PureState {
    /// Validating constructor: the norm must already be one.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::with_tolerances(amplitudes, &Tolerances::default())
    }

    pub fn with_tolerances(amplitudes: Vec<Complex64>, tol: &Tolerances) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("pure state needs d >= 1".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol.norm {
            return Err(Error::InvalidState(format!(
                "squared norm {norm_sq} differs from 1 by more than {}",
                tol.norm
            )));
        }
        Ok(Self {
            amplitudes: CVector::from_vec(amplitudes),
        })
    }

    /// Normalize an arbitrary non-zero vector.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = CVector::from_vec(amplitudes);
        Self::from_vector(v)
    }

    pub(crate) fn from_vector(v: CVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidState("pure state needs d >= 1".into()));
        }
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(Self {
            amplitudes: v.unscale(norm),
        })
    }

    /// Real amplitudes, normalized.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(amplitudes.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// Computational basis vector `|k>` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::param("k", format!("basis index {k} out of range for d = {d}")));
        }
        let mut v = CVector::zeros(d);
        v[k] = c(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn same_ray(&self, other: &PureState, tol: f64) -> bool {
        self.overlap(other).map(|r| (1.0 - r).abs() <= tol).unwrap_or(false)
    }

    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: self.projector(),
        }
    }
}

/// Unit-trace, positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct DensityMatrix {
    entries: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    dimension: usize,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl TryFrom<DensityRepr> for DensityMatrix {
    type Error = Error;

    fn try_from(repr: DensityRepr) -> Result<Self> {
        let d = repr.dimension;
        if repr.entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: repr.entries.len(),
            });
        }
        let m = CMatrix::from_row_iterator(d, d, repr.entries.iter().map(|&[re, im]| c(re, im)));
        DensityMatrix::new(m)
    }
}

impl From<DensityMatrix> for DensityRepr {
    fn from(rho: DensityMatrix) -> Self {
        let d = rho.dim();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = rho.entries[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        DensityRepr { dimension: d, entries }
    }
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tolerances(entries, &Tolerances::default())
    }

    /// Validates Hermiticity, trace and positivity. Eigenvalues in
    /// `[-tol.psd, 0)` are clamped to zero and the trace is renormalized.
    pub fn with_tolerances(entries: CMatrix, tol: &Tolerances) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || entries.ncols() != d {
            return Err(Error::InvalidState(format!(
                "density matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let deviation = hermitian_deviation(&entries);
        if deviation > tol.hermitian {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > tol.trace || trace.im.abs() > tol.trace {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let herm = symmetrize(&entries);
        let eig = SymmetricEigen::new(herm.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        if min < 0.0 {
            let clamped = eig.eigenvalues.map(|x| x.max(0.0));
            let total: f64 = clamped.iter().sum();
            let rebuilt = reconstruct(&eig.eigenvectors, &clamped.unscale(total));
            return Ok(Self { entries: rebuilt });
        }
        Ok(Self { entries: herm })
    }

    /// Construct from a matrix already known to be a valid state (internal
    /// iterates); only symmetrizes.
    pub(crate) fn from_trusted(entries: CMatrix) -> Self {
        Self {
            entries: symmetrize(&entries),
        }
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.density()
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        Ok(Self {
            entries: CMatrix::identity(d, d).unscale(d as f64),
        })
    }

    /// Convex mixture `sum_k w_k |psi_k><psi_k|`; weights must be a probability vector.
    pub fn mixture(weights: &[f64], states: &[PureState]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::param("weights", "need one weight per component"));
        }
        if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::param("weights", "weights must be non-negative and sum to 1"));
        }
        let d = states[0].dim();
        let mut m = CMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            check_dims(d, s.dim())?;
            m += s.projector().scale(*w);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn purity(&self) -> f64 {
        overlap_unchecked(self, self)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.purity() - 1.0).abs() <= tol
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// `Tr(a b)`.
///
/// For Hermitian inputs `Tr(ab) = sum_ij Re(a_ij conj(b_ij))`; each term is
/// computed as `a.re*b.re + a.im*b.im`, which makes the result bit-for-bit
/// symmetric in its arguments.
pub fn overlap(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(overlap_unchecked(a, b))
}

fn overlap_unchecked(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    a.entries
        .iter()
        .zip(b.entries.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Depolarizing channel `(1 - nu) x + nu Tr(x) I/d`.
pub fn depolarize(x: &DensityMatrix, nu: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::param("nu", format!("{nu} is outside [0, 1]")));
    }
    let d = x.dim();
    let trace = x.entries.trace();
    let mixed = CMatrix::identity(d, d) * (trace / d as f64);
    Ok(DensityMatrix {
        entries: x.entries.scale(1.0 - nu) + mixed.scale(nu),
    })
}

/// Haar-uniform pure state: a complex Gaussian vector, normalized.
pub fn haar_random_pure(d: usize, seed: Seed) -> Result<PureState> {
    haar_random_pure_with(d, &mut seed.rng())
}

pub fn haar_random_pure_with(d: usize, rng: &mut Rng) -> Result<PureState> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    loop {
        let v = CVector::from_fn(d, |_, _| {
            c(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        });
        if v.norm() > 1e-300 {
            return PureState::from_vector(v);
        }
    }
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal absorbed into `Q`.
pub fn haar_random_unitary(m: usize, rng: &mut Rng) -> CMatrix {
    let g = CMatrix::from_fn(m, m, |_, _| {
        c(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Largest elementwise deviation `|h_ij - conj(h_ji)|`.
pub fn hermitian_deviation(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

fn symmetrize(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

pub(crate) fn reconstruct(vectors: &CMatrix, values: &DVector<f64>) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lambda);
    }
    scaled * vectors.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix (tolerance 1e-10 elementwise).
pub fn hermitian_eigen(h: &CMatrix) -> Result<SymmetricEigen<Complex64, nalgebra::Dyn>> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let deviation = hermitian_deviation(h);
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if deviation > 1e-10 * scale {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(SymmetricEigen::new(symmetrize(h)))
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(h: &CMatrix) -> Result<f64> {
    let eig = hermitian_eigen(h)?;
    Ok(eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Normalized eigenvector belonging to the largest eigenvalue.
pub fn top_eigenvector(h: &CMatrix) -> Result<(f64, CVector)> {
    let eig = hermitian_eigen(h)?;
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .cloned()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Numerical("empty matrix".into()))?;
    Ok((lambda, eig.eigenvectors.column(k).into_owned()))
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
