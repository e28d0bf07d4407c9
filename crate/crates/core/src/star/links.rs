use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chain::{spoke_distribution, StarChain};
use super::dual::modified_geometrics;
use super::spectra::ReducedSpectra;
use crate::error::{Error, Result};
use crate::intertwining::{compose, QuasiLink};
use crate::markov::{hitting_time_cdf, make_absorbing, ProbabilityVector, Spectrum, StochasticMatrix};
use crate::tol;

/// `Lambda_2` with rows `delta_0, nu_1, ..., nu_r`; always stochastic.
pub fn build_lambda2(spectra: &ReducedSpectra, star: &StarChain) -> Result<QuasiLink> {
    let r = spectra.r();
    let mut m = DMatrix::zeros(r + 1, r + 1);
    m[(0, 0)] = 1.0;
    for i in 1..=r {
        let nu = spoke_distribution(spectra, star, i)?;
        m.row_mut(i).copy_from(nu.row());
    }
    QuasiLink::new(m)
}

/// Eigen-data of the deleted kernel used to expand `pi_{-0}`.
#[derive(Debug, Clone, Serialize)]
pub struct Lambda1Workspace {
    /// Orthonormal eigenrows of `S_0`, ordered as `eta`.
    #[serde(skip)]
    pub u_tilde: DMatrix<f64>,
    pub eta: Vec<f64>,
    /// `alpha = pi_{-0} D_0^{-1/2} U~^T`, so that `pi_{-0} = sum_k alpha_k u_k`.
    pub alphas: Vec<f64>,
    /// `alpha` restricted to each group `m(i)`.
    pub grouped: Vec<Vec<f64>>,
    /// Largest `|alpha_k|` over eigenvalues of `P_0` matching no `gamma`.
    pub unmatched_alpha_max: f64,
    /// `max_i |sum_{k in m(i)} alpha_k^2 - pi*(i)|`.
    pub mass_residual: f64,
}

impl Lambda1Workspace {
    /// `eta` must be the deleted spectrum (with eigenvectors) of the target-first chain.
    pub fn new(pi: &ProbabilityVector, eta: &Spectrum, spectra: &ReducedSpectra, star: &StarChain) -> Result<Self> {
        let u_tilde = eta
            .eigenvectors
            .clone()
            .ok_or_else(|| Error::InvalidDistribution("deleted spectrum carries no eigenvectors".into()))?;
        let n = u_tilde.nrows();
        if pi.len() != n + 1 {
            return Err(Error::DimensionMismatch { context: "deleted eigenvectors", expected: pi.len() - 1, found: n });
        }
        let root = DVector::from_fn(n, |j, _| pi[j + 1].sqrt());
        let alphas: Vec<f64> = (&u_tilde * root).iter().copied().collect();
        let mut matched = vec![false; n];
        spectra.multiplicity_map.iter().flatten().for_each(|&k| matched[k] = true);
        let unmatched_alpha_max =
            (0..n).filter(|&k| !matched[k]).map(|k| alphas[k].abs()).fold(0.0, f64::max);
        let grouped: Vec<Vec<f64>> =
            spectra.multiplicity_map.iter().map(|g| g.iter().map(|&k| alphas[k]).collect()).collect();
        let mass_residual = grouped
            .iter()
            .enumerate()
            .map(|(i, a)| (a.iter().map(|x| x * x).sum::<f64>() - star.pi_star[i + 1]).abs())
            .fold(0.0, f64::max);
        if unmatched_alpha_max > tol::UNMATCHED_ALPHA {
            let k = (0..n).filter(|&k| !matched[k]).max_by(|&a, &b| alphas[a].abs().total_cmp(&alphas[b].abs())).unwrap();
            return Err(Error::UnmatchedMass { eigenvalue: eta.eigenvalues[k], alpha: alphas[k] });
        }
        Ok(Lambda1Workspace { u_tilde, eta: eta.eigenvalues.clone(), alphas, grouped, unmatched_alpha_max, mass_residual })
    }
}

/// `Lambda_1` with rows `delta_0` and
/// `x_i = delta_0 + sum_{k in m(i)} c_k (-u_k 1^T | u_k)`, `c_k = alpha_k / pi*(i)`
/// (with `pi*(i)` evaluated as `sum_{k in m(i)} alpha_k^2`),
/// `u_k = u~_k D_0^{1/2}`. Independent of the sign and basis chosen inside each eigenspace.
pub fn build_lambda1(
    pi: &ProbabilityVector,
    spectra: &ReducedSpectra,
    star: &StarChain,
    workspace: &Lambda1Workspace,
) -> Result<QuasiLink> {
    let n = workspace.u_tilde.nrows();
    let r = spectra.r();
    let mut m = DMatrix::zeros(r + 1, n + 1);
    m[(0, 0)] = 1.0;
    for (i, group) in spectra.multiplicity_map.iter().enumerate() {
        let row = i + 1;
        m[(row, 0)] = 1.0;
        // pi*(i) = sum alpha_k^2 over the group; this form keeps full relative
        // accuracy for spokes whose mass comes from a nearly cancelled pair
        let mass: f64 = group.iter().map(|&k| workspace.alphas[k].powi(2)).sum();
        let mass = if mass > 0.0 { mass } else { star.pi_star[row] };
        for &k in group {
            let c = workspace.alphas[k] / mass;
            for j in 0..n {
                let u = workspace.u_tilde[(k, j)] * pi[j + 1].sqrt();
                m[(row, j + 1)] += c * u;
                m[(row, 0)] -= c * u;
            }
        }
    }
    QuasiLink::new(m)
}

/// `Lambda = Lambda_2 Lambda_1`.
pub fn big_link(lambda2: &QuasiLink, lambda1: &QuasiLink) -> Result<QuasiLink> {
    compose(lambda2, lambda1)
}

/// `max_t |pi_{-0} P_0^t 1^T - sum_j pi*(j) gamma_j^t|` for `t <= horizon`
/// (target is state 0).
pub fn stationary_tail_check(star: &StarChain, p: &StochasticMatrix, pi: &ProbabilityVector, horizon: usize) -> f64 {
    let p0 = p.deleted(0);
    let mut v = nalgebra::RowDVector::from_fn(p.len() - 1, |_, j| pi[j + 1]);
    let r = star.r();
    let mut worst = 0.0_f64;
    for t in 0..=horizon {
        if t > 0 {
            v = &v * &p0;
        }
        let spectral: f64 = (1..=r).map(|j| star.pi_star[j] * star.p_star.get(j, j).powi(t as i32)).sum();
        worst = worst.max((v.sum() - spectral).abs());
    }
    worst
}

/// One evaluation point of the continuous/discrete transform identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformPoint {
    pub s: f64,
    /// `psi(s) = pi(0) + pi_{-0} (sI - (P_0 - I))^{-1} P(:,0)_{-0}`.
    pub laplace: f64,
    /// `G(1 / (1 + s))` from the exact hitting-time mass function.
    pub pgf: f64,
    /// `prod_i [rho_i + (1 - rho_i)(1 - gamma_i) / (1 - gamma_i + s)]`.
    pub product: f64,
}

impl TransformPoint {
    pub fn discrepancy(&self) -> f64 {
        (self.laplace - self.pgf).abs().max((self.laplace - self.product).abs())
    }
}

pub const TRANSFORM_POINTS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// Compares the Laplace transform of the continuized hitting time with the
/// generating function of the discrete one and with the product formula.
pub fn transform_identity_check(
    p: &StochasticMatrix,
    pi: &ProbabilityVector,
    spectra: &ReducedSpectra,
    horizon: usize,
    points: &[f64],
) -> Result<Vec<TransformPoint>> {
    let n = p.len() - 1;
    let p0 = p.deleted(0);
    let back = DVector::from_fn(n, |i, _| p.get(i + 1, 0));
    let rest = nalgebra::RowDVector::from_fn(n, |_, j| pi[j + 1]);
    let pmf = hitting_time_cdf(pi, &make_absorbing(p, 0)?, 0, horizon)?.pmf();
    let ys = modified_geometrics(spectra)?;
    points
        .iter()
        .map(|&s| {
            let a = DMatrix::identity(n, n) * (1.0 + s) - &p0;
            let h = a.lu().solve(&back).ok_or(Error::ZeroDenominator { step: 0, dual_state: 0, primary_state: 0 })?;
            let laplace = pi[0] + (&rest * h)[0];
            let z = 1.0 / (1.0 + s);
            let pgf = pmf.iter().rev().fold(0.0, |acc, m| acc * z + m);
            let product = ys.iter().map(|y| y.pgf(z)).product();
            Ok(TransformPoint { s, laplace, pgf, product })
        })
        .collect()
}
