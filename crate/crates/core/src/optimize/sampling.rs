use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{evaluate_pure, InequalitySpec};
use crate::rng::Seed;
use crate::state::{haar_random_pure_with, PureState};

/// Rounding margin above the classical bound before a value counts as a
/// violation.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub inequality: String,
    pub n: usize,
    pub d: usize,
    pub num_sets: usize,
    pub seed: Seed,
    pub classical_bound: f64,
    pub values: Vec<f64>,
    pub max_value: f64,
    /// Number of sets whose value exceeds the classical bound by more than
    /// [`VIOLATION_TOL`].
    pub violation_count: usize,
}

/// Evaluate `spec` on `num_sets` independent tuples of Haar-random states.
/// Set `k` draws from RNG stream `k`, so the report does not depend on the
/// thread count.
pub fn haar_experiment(spec: &InequalitySpec, d: usize, num_sets: usize, seed: Seed) -> Result<SamplingReport> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if num_sets == 0 {
        return Err(Error::param("num_sets", "need at least one set"));
    }
    let values: Vec<f64> = (0..num_sets)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.stream(k as u64);
            let states: Vec<PureState> = (0..spec.n)
                .map(|_| haar_random_pure_with(d, &mut rng))
                .collect::<Result<_>>()?;
            evaluate_pure(spec, &states)
        })
        .collect::<Result<_>>()?;
    let max_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let violation_count = values
        .iter()
        .filter(|&&v| v > spec.classical_bound + VIOLATION_TOL)
        .count();
    Ok(SamplingReport {
        inequality: spec.name.clone(),
        n: spec.n,
        d,
        num_sets,
        seed,
        classical_bound: spec.classical_bound,
        values,
        max_value,
        violation_count,
    })
}

/// Equal-width histogram of `values` over `[lo, hi]`; values outside are
/// clamped into the edge bins so counts always sum to `values.len()`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<(f64, f64, usize)>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::param("bins", "need at least one bin and hi > lo"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::make_hn;

    #[test]
    fn one_dimension_saturates_h3() {
        let r = haar_experiment(&make_hn(3).unwrap(), 1, 50, Seed(2)).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn report_invariants_and_determinism() {
        let spec = make_hn(4).unwrap();
        let a = haar_experiment(&spec, 3, 500, Seed(4)).unwrap();
        let b = haar_experiment(&spec, 3, 500, Seed(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.max_value, a.values.iter().cloned().fold(f64::MIN, f64::max));
        assert_eq!(a.violation_count, a.values.iter().filter(|&&v| v > 1.0).count());
        assert!(a.max_value <= 4.0 / 3.0 + 1e-9);
        assert!(haar_experiment(&spec, 3, 0, Seed(4)).is_err());
    }

    #[test]
    fn histogram_counts_sum() {
        let h = histogram(&[0.0, 0.5, 1.0, 2.0, -1.0], 0.0, 1.0, 4).unwrap();
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
        assert_eq!(h[0].2, 2);
        assert_eq!(h[3].2, 2);
    }
}
