use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{make_hn, InequalitySpec, Threshold};
use crate::optimize::maximize::{maximize_pure_with, MaximizeConfig};
use crate::optimize::sdp::{sdp_upper_bound, SdpConfig};
use crate::rng::Seed;

/// Largest `n` for which the pure-state search is run.
pub const PURE_N_MAX: usize = 12;
/// Largest `n` accepted by the SDP path.
pub const SDP_N_MAX: usize = 4096;
/// Agreement tolerance between the two methods.
pub const AGREEMENT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellMethod {
    Pure,
    Sdp,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCell {
    pub n: usize,
    pub d: usize,
    /// Best available estimate of the maximum of `h_n` at dimension `d`:
    /// the pure-state value when it was computed, the SDP bound otherwise.
    pub max_value: f64,
    pub pure_value: Option<f64>,
    pub sdp_value: Option<f64>,
    pub method: CellMethod,
    /// Whether the two methods agree within [`AGREEMENT_TOL`].
    pub agree: Option<bool>,
    /// False when `max_value` is below the cell at `d - 1` by more than
    /// 1e-8, which can only come from an incomplete search.
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub maximize: MaximizeConfig,
    pub sdp: SdpConfig,
    pub seed: Seed,
    /// Cells with `n` above this use the SDP only.
    pub pure_n_max: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            maximize: MaximizeConfig::default(),
            sdp: SdpConfig::default(),
            seed: Seed(0),
            pure_n_max: 10,
        }
    }
}

/// SDP bound for a cell, extended to `d >= n` where the bound at `d = n - 1`
/// already covers every realization.
fn sdp_cell(n: usize, d: usize, cfg: &SdpConfig) -> Result<Option<f64>> {
    if n < 4 {
        return Ok(None);
    }
    Ok(Some(sdp_upper_bound(n, d.min(n - 1), cfg)?.value))
}

/// Table of maximal `h_n` values for `3 <= n <= n_max`, `2 <= d <= min(n, d_max)`.
pub fn dimension_thresholds(n_max: usize, d_max: usize, config: &ThresholdConfig) -> Result<Vec<ThresholdCell>> {
    if !(3..=SDP_N_MAX).contains(&n_max) {
        return Err(Error::param("n_max", format!("need 3 <= n_max <= {SDP_N_MAX}")));
    }
    if d_max < 2 {
        return Err(Error::param("d_max", "need d_max >= 2"));
    }
    if config.pure_n_max > PURE_N_MAX {
        return Err(Error::param(
            "pure_n_max",
            format!("the pure-state search is limited to n <= {PURE_N_MAX}"),
        ));
    }
    let mut cells = Vec::new();
    for n in 3..=n_max {
        let spec = make_hn(n)?;
        let mut previous: Option<f64> = None;
        for d in 2..=d_max.min(n) {
            let pure_value = if n <= config.pure_n_max {
                let seed = config.seed.derive((n as u64) << 32 | d as u64);
                Some(maximize_pure_with(&spec, d, &config.maximize, seed)?.value)
            } else {
                None
            };
            let sdp_value = sdp_cell(n, d, &config.sdp)?;
            let (max_value, method) = match (pure_value, sdp_value) {
                (Some(p), Some(_)) => (p, CellMethod::Both),
                (Some(p), None) => (p, CellMethod::Pure),
                (None, Some(s)) => (s, CellMethod::Sdp),
                (None, None) => unreachable!("every n >= 3 has a pure or SDP path"),
            };
            let agree = match (pure_value, sdp_value) {
                (Some(p), Some(s)) => Some((p - s).abs() <= AGREEMENT_TOL),
                _ => None,
            };
            let monotone = previous.is_none_or(|prev| max_value >= prev - 1e-8);
            previous = Some(max_value);
            cells.push(ThresholdCell {
                n,
                d,
                max_value,
                pure_value,
                sdp_value,
                method,
                agree,
                monotone,
            });
        }
    }
    Ok(cells)
}

/// Thresholds used by default when classifying a measured value of `spec`.
///
/// For `h_n` with `n >= 4` these are the SDP bounds for `2 <= d <= n - 1`;
/// other inequalities use a seeded pure-state search.
pub fn default_thresholds(spec: &InequalitySpec, d_max: usize, seed: Seed) -> Result<Vec<Threshold>> {
    let top = d_max.min(spec.n.saturating_sub(1));
    let is_hn = spec.n >= 3 && make_hn(spec.n).is_ok_and(|h| h.weights == spec.weights);
    let mut out = Vec::new();
    for d in 2..=top {
        let max_value = if is_hn && spec.n >= 4 {
            sdp_upper_bound(spec.n, d, &SdpConfig::default())?.value
        } else {
            let cfg = MaximizeConfig {
                restarts: 50,
                ..MaximizeConfig::default()
            };
            maximize_pure_with(spec, d, &cfg, seed.derive(d as u64))?.value
        };
        out.push(Threshold { d, max_value });
    }
    Ok(out)
}
