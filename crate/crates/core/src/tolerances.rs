//! Numerical tolerances shared by every module.
//!
//! Constructors that validate input take a [`Tolerances`] record; the
//! convenience constructors use [`Tolerances::default`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed deviation of `sum |a_k|^2` from one for a pure state.
    pub norm: f64,
    /// Elementwise Hermiticity tolerance.
    pub hermitian: f64,
    /// Eigenvalues in `[-psd, 0)` are clamped to zero.
    pub psd: f64,
    /// Allowed deviation of the trace from one.
    pub trace: f64,
    /// Allowed excursion of an overlap outside `[0, 1]` before it is rejected.
    pub overlap_range: f64,
    /// Unitarity tolerance for mesh decomposition input (Frobenius).
    pub unitary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-12,
            hermitian: 1e-12,
            psd: 1e-10,
            trace: 1e-12,
            overlap_range: 1e-12,
            unitary: 1e-10,
        }
    }
}

impl Tolerances {
    /// Scale every tolerance by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            norm: self.norm * factor,
            hermitian: self.hermitian * factor,
            psd: self.psd * factor,
            trace: self.trace * factor,
            overlap_range: self.overlap_range * factor,
            unitary: self.unitary * factor,
        }
    }
}
