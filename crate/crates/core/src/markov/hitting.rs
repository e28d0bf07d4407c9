use serde::Serialize;

use super::matrix::{ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};

/// Tabulated `P(T <= t)` for `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingCdf {
    pub horizon: usize,
    pub values: Vec<f64>,
}

impl HittingCdf {
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "a CDF table needs at least t = 0");
        HittingCdf { horizon: values.len() - 1, values }
    }

    /// CDF of a law given by its probability mass function on `0..=horizon`.
    pub fn from_pmf(pmf: &[f64]) -> Self {
        let mut acc = 0.0;
        let values = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self::from_values(values)
    }

    pub fn pmf(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    /// Nondecreasing and inside `[0, 1]`, up to `slack`.
    pub fn is_valid(&self, slack: f64) -> bool {
        self.values.iter().all(|v| (-slack..=1.0 + slack).contains(v))
            && self.values.windows(2).all(|w| w[1] >= w[0] - slack)
    }

    pub fn max_discrepancy(&self, other: &HittingCdf) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mean and variance from tail sums over the tabulated horizon.
    ///
    /// `E T = sum P(T > t)` and `E T^2 = sum (2t + 1) P(T > t)`; accurate when
    /// the tail beyond the horizon is negligible.
    pub fn moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut second = 0.0;
        for (t, v) in self.values.iter().enumerate() {
            let tail = 1.0 - v;
            mean += tail;
            second += (2 * t + 1) as f64 * tail;
        }
        (mean, second - mean * mean)
    }
}

/// `P(T_target <= t) = (pi0 P_abs^t)(target)` by repeated vector-matrix products.
pub fn hitting_time_cdf(
    pi0: &ProbabilityVector,
    p_abs: &StochasticMatrix,
    target: usize,
    horizon: usize,
) -> Result<HittingCdf> {
    p_abs.check_index(target)?;
    if pi0.len() != p_abs.len() {
        return Err(Error::DimensionMismatch { context: "initial law", expected: p_abs.len(), found: pi0.len() });
    }
    if !p_abs.is_absorbing(target) {
        return Err(Error::TargetNotAbsorbing { target });
    }
    let m = p_abs.matrix();
    let mut dist = pi0.row().clone();
    let mut values = Vec::with_capacity(horizon + 1);
    values.push(dist[target]);
    for _ in 0..horizon {
        dist = &dist * m;
        values.push(dist[target]);
    }
    Ok(HittingCdf { horizon, values })
}

/// `Geo(success)` on `{1, 2, ...}`, mass function on `0..=horizon`.
/// `success = 1` is unit mass at 1.
pub fn geometric_pmf(success: f64, horizon: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; horizon + 1];
    let mut stay = 1.0;
    for slot in pmf.iter_mut().skip(1) {
        *slot = stay * success;
        stay *= 1.0 - success;
    }
    pmf
}

/// Law of `rho * delta_0 + (1 - rho) Geo(1 - gamma)` on `0..=horizon`.
pub fn modified_geometric_pmf(rho: f64, gamma: f64, horizon: usize) -> Vec<f64> {
    let mut pmf = geometric_pmf(1.0 - gamma, horizon);
    pmf.iter_mut().for_each(|v| *v *= 1.0 - rho);
    pmf[0] += rho;
    pmf
}

/// Convolution of two mass functions, truncated to `0..=horizon`.
pub fn convolve_truncated(a: &[f64], b: &[f64], horizon: usize) -> Vec<f64> {
    let mut out = vec![0.0; horizon + 1];
    for (i, &x) in a.iter().enumerate().take(horizon + 1) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(horizon + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Unit mass at 0 on `0..=horizon`, the identity for [`convolve_truncated`].
pub fn unit_mass(horizon: usize) -> Vec<f64> {
    let mut v = vec![0.0; horizon + 1];
    v[0] = 1.0;
    v
}
