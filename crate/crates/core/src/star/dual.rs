use nalgebra::DMatrix;
use serde::Serialize;

use super::spectra::ReducedSpectra;
use crate::error::{Error, Result};
use crate::markov::{convolve_truncated, modified_geometric_pmf, unit_mass, HittingCdf, ProbabilityVector, StochasticMatrix};

/// `rho delta_0 + (1 - rho) Geo(1 - gamma)`, the geometric part supported on `{1, 2, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModifiedGeometric {
    pub rho: f64,
    pub gamma: f64,
}

impl ModifiedGeometric {
    pub fn new(rho: f64, gamma: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) || !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidDistribution(format!("modified geometric needs 0 < rho < 1 and 0 <= gamma < 1, got ({rho}, {gamma})")));
        }
        Ok(ModifiedGeometric { rho, gamma })
    }

    pub fn pmf(&self, horizon: usize) -> Vec<f64> {
        modified_geometric_pmf(self.rho, self.gamma, horizon)
    }

    /// `(1 - rho) / (1 - gamma)`.
    pub fn mean(&self) -> f64 {
        (1.0 - self.rho) / (1.0 - self.gamma)
    }

    pub fn variance(&self) -> f64 {
        let q = 1.0 - self.gamma;
        let second = (1.0 - self.rho) * (2.0 - q) / (q * q);
        second - self.mean().powi(2)
    }

    /// Probability generating function `E z^Y`.
    pub fn pgf(&self, z: f64) -> f64 {
        self.rho + (1.0 - self.rho) * (1.0 - self.gamma) * z / (1.0 - self.gamma * z)
    }
}

/// The laws `Y_1, ..., Y_r` of a reduced spectrum.
pub fn modified_geometrics(spectra: &ReducedSpectra) -> Result<Vec<ModifiedGeometric>> {
    spectra.rho().into_iter().zip(&spectra.gammas).map(|(rho, &g)| ModifiedGeometric::new(rho, g)).collect()
}

/// Pure-descent absorbing chain on `0..=r`, started from `pi^`.
#[derive(Debug, Clone, Serialize)]
pub struct DualChain {
    pub pi_hat: ProbabilityVector,
    pub p_hat: StochasticMatrix,
    /// `pi^_k` for `k = 0..=r`, padded to length `r + 1`.
    pub prefix_laws: Vec<Vec<f64>>,
}

/// `pi^_k(j) = rho_k ... rho_{j+1} (1 - rho_j)`, `pi^_k(0) = prod rho`.
pub fn dual_prefix_law(rho: &[f64], k: usize) -> Vec<f64> {
    let mut law = vec![0.0; rho.len() + 1];
    let mut carried = 1.0;
    for j in (1..=k).rev() {
        law[j] = carried * (1.0 - rho[j - 1]);
        carried *= rho[j - 1];
    }
    law[0] = carried;
    law
}

pub fn build_dual_chain(spectra: &ReducedSpectra) -> Result<DualChain> {
    let r = spectra.r();
    let rho = spectra.rho();
    let prefix_laws: Vec<Vec<f64>> = (0..=r).map(|k| dual_prefix_law(&rho, k)).collect();
    let mut p = DMatrix::zeros(r + 1, r + 1);
    p[(0, 0)] = 1.0;
    for i in 1..=r {
        let g = spectra.gammas[i - 1];
        p[(i, i)] = g;
        for j in 0..i {
            p[(i, j)] = (1.0 - g) * prefix_laws[i - 1][j];
        }
    }
    Ok(DualChain {
        pi_hat: ProbabilityVector::new(prefix_laws[r].clone())?,
        p_hat: StochasticMatrix::from_matrix(p)?,
        prefix_laws,
    })
}

/// Exact law of `sum_i Y_i` on `0..=horizon` by repeated convolution.
pub fn modified_geometric_sum_cdf(spectra: &ReducedSpectra, horizon: usize) -> Result<HittingCdf> {
    let pmf = modified_geometrics(spectra)?
        .iter()
        .fold(unit_mass(horizon), |acc, y| convolve_truncated(&acc, &y.pmf(horizon), horizon));
    Ok(HittingCdf::from_pmf(&pmf))
}

/// `sum_i (1 - rho_i) / (1 - gamma_i)`, the mean of the hitting time from stationarity.
pub fn stationary_mean(spectra: &ReducedSpectra) -> f64 {
    spectra.rho().iter().zip(&spectra.gammas).map(|(r, g)| (1.0 - r) / (1.0 - g)).sum()
}
