//! Linear functionals on the weighted complete event graph `K_n`.
//!
//! Nodes are states, edge weights are two-state overlaps. An
//! [`InequalitySpec`] attaches a signed coefficient to some edges together
//! with the bound obeyed by every incoherent (jointly diagonal) realization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{overlap, DensityMatrix, PureState};

/// Index of edge `(i, j)`, `i < j`, in upper-triangular row-major order.
#[inline]
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All edges `(i, j)` with `i < j` in wire order.
pub fn edges(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Symmetric matrix of pairwise overlaps with unit diagonal.
///
/// Only the strict upper triangle is stored, so `get(i, j) == get(j, i)`
/// holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OverlapSetRepr", into = "OverlapSetRepr")]
pub struct OverlapSet {
    n: usize,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct OverlapSetRepr {
    n: usize,
    overlaps: Vec<f64>,
}

impl TryFrom<OverlapSetRepr> for OverlapSet {
    type Error = Error;

    fn try_from(repr: OverlapSetRepr) -> Result<Self> {
        OverlapSet::new(repr.n, repr.overlaps)
    }
}

impl From<OverlapSet> for OverlapSetRepr {
    fn from(set: OverlapSet) -> Self {
        OverlapSetRepr {
            n: set.n,
            overlaps: set.upper,
        }
    }
}

/// Slack allowed outside `[0, 1]` before an overlap is rejected. Values
/// inside the slack are clamped.
const RANGE_SLACK: f64 = 1e-12;

impl OverlapSet {
    /// `upper` lists `r_{i,j}` for `i < j` in row-major order.
    pub fn new(n: usize, upper: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "an overlap set needs at least two nodes"));
        }
        let expected = n * (n - 1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: upper.len(),
            });
        }
        let mut upper = upper;
        for (k, r) in upper.iter_mut().enumerate() {
            if !r.is_finite() || *r < -RANGE_SLACK || *r > 1.0 + RANGE_SLACK {
                return Err(Error::param("overlaps", format!("entry {k} = {r} is outside [0, 1]")));
            }
            *r = r.clamp(0.0, 1.0);
        }
        Ok(Self { n, upper })
    }

    /// Build from a full matrix, reading only the strict upper triangle.
    pub fn from_matrix(r: &[Vec<f64>]) -> Result<Self> {
        let n = r.len();
        if r.iter().any(|row| row.len() != n) {
            return Err(Error::param("overlaps", "matrix must be square"));
        }
        Self::new(n, edges(n).map(|(i, j)| r[i][j]).collect())
    }

    pub fn from_states(states: &[DensityMatrix]) -> Result<Self> {
        let n = states.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (i, j) in edges(n) {
            upper.push(overlap(&states[i], &states[j])?);
        }
        Self::new(n, upper)
    }

    pub fn from_pure(states: &[PureState]) -> Result<Self> {
        let n = states.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (i, j) in edges(n) {
            upper.push(states[i].overlap(&states[j])?);
        }
        Self::new(n, upper)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Upper-triangular entries in wire order.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.upper[edge_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.upper[edge_index(self.n, j, i)],
        }
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Sub-graph on `nodes`, relabelled `0..nodes.len()` in the given order.
    pub fn restrict(&self, nodes: &[usize]) -> Result<Self> {
        if let Some(&bad) = nodes.iter().find(|&&k| k >= self.n) {
            return Err(Error::param("nodes", format!("node {bad} out of range")));
        }
        let m = nodes.len();
        Self::new(m, edges(m).map(|(a, b)| self.get(nodes[a], nodes[b])).collect())
    }
}

/// One signed edge coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Signed edge weights plus the bound satisfied by every incoherent set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InequalitySpecRepr")]
pub struct InequalitySpec {
    pub name: String,
    pub n: usize,
    pub classical_bound: f64,
    /// Canonical form: `i < j`, sorted in wire order, no duplicates.
    pub weights: Vec<Weight>,
}

#[derive(Deserialize)]
struct InequalitySpecRepr {
    name: String,
    n: usize,
    classical_bound: f64,
    weights: Vec<Weight>,
}

impl TryFrom<InequalitySpecRepr> for InequalitySpec {
    type Error = Error;

    fn try_from(r: InequalitySpecRepr) -> Result<Self> {
        InequalitySpec::new(r.name, r.n, r.classical_bound, r.weights)
    }
}

impl InequalitySpec {
    pub fn new(name: impl Into<String>, n: usize, classical_bound: f64, weights: Vec<Weight>) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "an inequality needs at least two nodes"));
        }
        if !classical_bound.is_finite() {
            return Err(Error::param("classical_bound", "must be finite"));
        }
        let mut canon = Vec::with_capacity(weights.len());
        for Weight { i, j, w } in weights {
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            if i == j || j >= n {
                return Err(Error::param("weights", format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            if !w.is_finite() {
                return Err(Error::param("weights", format!("non-finite coefficient on ({i}, {j})")));
            }
            canon.push(Weight { i, j, w });
        }
        canon.sort_by_key(|e| edge_index(n, e.i, e.j));
        if canon.windows(2).any(|p| p[0].i == p[1].i && p[0].j == p[1].j) {
            return Err(Error::param("weights", "duplicate edge"));
        }
        Ok(Self {
            name: name.into(),
            n,
            classical_bound,
            weights: canon,
        })
    }

    /// Coefficient on edge `(i, j)` (zero if absent).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.weights.iter().find(|e| e.i == i && e.j == j).map_or(0.0, |e| e.w)
    }

    /// Dense symmetric coefficient matrix with zero diagonal.
    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; self.n]; self.n];
        for e in &self.weights {
            w[e.i][e.j] = e.w;
            w[e.j][e.i] = e.w;
        }
        w
    }
}

/// The `h_n` family: `+1` on every edge `(0, k)`, `-1` on every edge among
/// nodes `1..n`; classical bound 1.
pub fn make_hn(n: usize) -> Result<InequalitySpec> {
    if n < 3 {
        return Err(Error::param("n", format!("h_n is defined for n >= 3, got {n}")));
    }
    let weights = edges(n)
        .map(|(i, j)| Weight {
            i,
            j,
            w: if i == 0 { 1.0 } else { -1.0 },
        })
        .collect();
    InequalitySpec::new(format!("h{n}"), n, 1.0, weights)
}

/// Pentagon witness for coherence inside a Mach-Zehnder interferometer.
pub fn make_h_mzi() -> InequalitySpec {
    let plus = [(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)];
    let minus = [(0, 2), (0, 3), (1, 3), (1, 4), (2, 4)];
    let weights = plus
        .iter()
        .map(|&(i, j)| Weight { i, j, w: 1.0 })
        .chain(minus.iter().map(|&(i, j)| Weight { i, j, w: -1.0 }))
        .collect();
    InequalitySpec::new("h_mzi", 5, 2.0, weights).expect("static pentagon spec is valid")
}

/// Look up a named inequality: `h3`..`h4096`, `hn:<n>` or `h_mzi`.
pub fn by_name(name: &str) -> Result<InequalitySpec> {
    let lower = name.trim().to_ascii_lowercase();
    if lower == "h_mzi" || lower == "hmzi" || lower == "pentagon" {
        return Ok(make_h_mzi());
    }
    let digits = lower
        .strip_prefix("hn:")
        .or_else(|| lower.strip_prefix('h'))
        .ok_or_else(|| Error::param("inequality", format!("unknown inequality `{name}`")))?;
    let n: usize = digits
        .parse()
        .map_err(|_| Error::param("inequality", format!("unknown inequality `{name}`")))?;
    make_hn(n)
}

/// `sum_{i<j} w_ij r_ij`.
pub fn evaluate(spec: &InequalitySpec, r: &OverlapSet) -> Result<f64> {
    if spec.n != r.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: r.n(),
        });
    }
    Ok(spec.weights.iter().map(|e| e.w * r.get(e.i, e.j)).sum())
}

pub fn evaluate_states(spec: &InequalitySpec, states: &[DensityMatrix]) -> Result<f64> {
    check_count(spec, states.len())?;
    evaluate(spec, &OverlapSet::from_states(states)?)
}

pub fn evaluate_pure(spec: &InequalitySpec, states: &[PureState]) -> Result<f64> {
    check_count(spec, states.len())?;
    let mut total = 0.0;
    for e in &spec.weights {
        total += e.w * states[e.i].overlap(&states[e.j])?;
    }
    Ok(total)
}

fn check_count(spec: &InequalitySpec, found: usize) -> Result<()> {
    if spec.n != found {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found,
        });
    }
    Ok(())
}

/// Sum of all off-diagonal overlaps.
pub fn hn_plus(r: &OverlapSet) -> f64 {
    r.upper().iter().sum()
}

/// The qubit `h_4` gap function: with three states fixed to `|0>`, `|theta>`
/// and `cos(alpha)|0> + e^{i phi} sin(alpha)|1>` and the fourth chosen
/// optimally, `h_4 - 1` equals this value. It is never positive.
pub fn qubit_h4_gap(theta: f64, alpha: f64, phi: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    let lambda_plus = 1.5
        + 0.5
            * (2.0 * (2.0 * alpha).sin() * (2.0 * theta).sin() * phi.cos()
                + 4.0 * (2.0 * alpha).cos() * ct * ct
                + 2.0 * (2.0 * theta).cos()
                + 3.0)
                .max(0.0)
                .sqrt();
    lambda_plus
        - 1.0
        - ct * ct
        - ca * ca
        - ct * ct * ca * ca
        - st * st * sa * sa
        - 0.5 * (2.0 * theta).sin() * (2.0 * alpha).sin() * phi.cos()
}

/// `(d, max_value)` pair used to bound the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub d: usize,
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessVerdict {
    pub value: f64,
    pub classical_bound: f64,
    pub coherence_witnessed: bool,
    /// One plus the largest `d` whose maximum is exceeded; 1 if none is,
    /// raised to 2 when coherence is witnessed.
    pub min_dimension: usize,
    pub thresholds_used: Vec<Threshold>,
    /// Set when no thresholds were supplied, so `min_dimension` carries no
    /// information.
    pub thresholds_missing: bool,
    pub slack: f64,
}

/// Decide coherence and a lower bound on the dimension. A value must exceed
/// a bound by more than `slack` to count as a violation.
pub fn classify(spec: &InequalitySpec, value: f64, thresholds: &[Threshold], slack: f64) -> Result<WitnessVerdict> {
    if !value.is_finite() {
        return Err(Error::param("value", "must be finite"));
    }
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::param("slack", "must be finite and non-negative"));
    }
    if thresholds.windows(2).any(|p| p[0].d >= p[1].d) {
        return Err(Error::param("thresholds", "must be sorted by strictly increasing d"));
    }
    let exceeded = thresholds
        .iter()
        .filter(|t| value > t.max_value + slack)
        .map(|t| t.d)
        .max();
    let coherence_witnessed = value > spec.classical_bound + slack;
    let floor = if coherence_witnessed { 2 } else { 1 };
    Ok(WitnessVerdict {
        value,
        classical_bound: spec.classical_bound,
        coherence_witnessed,
        min_dimension: exceeded.map_or(1, |d| d + 1).max(floor),
        thresholds_used: thresholds.to_vec(),
        thresholds_missing: thresholds.is_empty(),
        slack,
    })
}
