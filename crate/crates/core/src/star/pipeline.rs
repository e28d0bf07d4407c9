use nalgebra::DMatrix;
use serde::Serialize;

use super::chain::{build_star_chain, spoke_distribution, spoke_residuals, StarChain};
use super::dual::{build_dual_chain, modified_geometric_sum_cdf, stationary_mean, DualChain};
use super::links::{
    big_link, build_lambda1, build_lambda2, stationary_tail_check, transform_identity_check, Lambda1Workspace,
    TransformPoint,
};
use super::spectra::{auto_shift, reduce_spectra, shift_chain, ReducedSpectra};
use crate::error::{Error, Result};
use crate::intertwining::{certify, IntertwiningCertificate, QuasiLink, Side};
use crate::markov::{
    check_reversible, deleted_spectrum, hitting_time_cdf, make_absorbing, reversible_spectrum, stationary_distribution,
    HittingCdf, ProbabilityVector, Spectrum, StochasticMatrix,
};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Relative tolerance for cancelling eigenvalues of `P` against `P_0`.
    pub eps_match: f64,
    /// Shift the chain when the smallest surviving eigenvalue is negative.
    pub auto_shift: bool,
    /// Explicit laziness shift `c`, applied before anything else.
    pub shift: Option<f64>,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { eps_match: tol::EPS_MATCH, auto_shift: true, shift: None }
    }
}

/// Internal consistency residuals of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `|P*(0,0) - (sum lambda - sum gamma)|`.
    pub trace_residual: f64,
    pub star_balance_residual: f64,
    pub mix_residual: f64,
    pub spoke_link_residual: f64,
    pub unmatched_alpha_max: f64,
    pub alpha_mass_residual: f64,
    /// `|pi*(0) - pi(0)|`.
    pub hub_mass_residual: f64,
    pub spectral_reconstruction_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificates {
    pub lambda2: IntertwiningCertificate,
    pub lambda1: IntertwiningCertificate,
    pub lambda: IntertwiningCertificate,
}

/// Everything produced by [`decompose`]. Links to the given chain use its
/// original state order; the star and dual chains have hub/absorbing state 0.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub labels: Vec<String>,
    pub target: usize,
    pub shift_applied: Option<f64>,
    pub spectra: ReducedSpectra,
    pub rho: Vec<f64>,
    pub star: StarChain,
    pub spokes: Vec<ProbabilityVector>,
    pub dual: DualChain,
    pub lambda1: QuasiLink,
    pub lambda2: QuasiLink,
    pub lambda: QuasiLink,
    pub certificates: Certificates,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    /// The (possibly shifted) chain actually decomposed.
    #[serde(skip)]
    pub chain: StochasticMatrix,
    #[serde(skip)]
    pub pi: ProbabilityVector,
    #[serde(skip)]
    pub p_abs: StochasticMatrix,
    #[serde(skip)]
    pub workspace: Lambda1Workspace,
    #[serde(skip)]
    order: Vec<usize>,
}

/// Hitting-time CDFs of the three descriptions of `T_0` from stationarity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfTable {
    pub primary: HittingCdf,
    pub dual: HittingCdf,
    pub convolution: HittingCdf,
}

impl CdfTable {
    pub fn max_discrepancy(&self) -> f64 {
        self.primary.max_discrepancy(&self.dual).max(self.primary.max_discrepancy(&self.convolution))
    }

    /// Rows `t, cdf_primary, cdf_dual, cdf_convolution`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,cdf_primary,cdf_dual,cdf_convolution\n");
        for t in 0..self.primary.values.len() {
            out += &format!(
                "{t},{},{},{}\n",
                self.primary.values[t], self.dual.values[t], self.convolution.values[t]
            );
        }
        out
    }
}

impl Decomposition {
    pub fn r(&self) -> usize {
        self.spectra.r()
    }

    pub fn lambda_is_stochastic(&self) -> bool {
        self.lambda.is_stochastic()
    }

    /// `sum_i (1 - rho_i) / (1 - gamma_i)`.
    pub fn mean(&self) -> f64 {
        stationary_mean(&self.spectra)
    }

    /// All link certificates within `algebraic` (star side) and `spectral` (links through eigenvectors).
    pub fn passes(&self, algebraic: f64, spectral: f64) -> bool {
        let c = &self.certificates;
        c.lambda2.passes(algebraic, algebraic) && c.lambda1.passes(spectral, spectral) && c.lambda.passes(spectral, spectral)
    }

    pub fn cdf_table(&self, horizon: usize) -> Result<CdfTable> {
        Ok(CdfTable {
            primary: hitting_time_cdf(&self.pi, &self.p_abs, self.target, horizon)?,
            dual: hitting_time_cdf(&self.dual.pi_hat, &self.dual.p_hat, 0, horizon)?,
            convolution: modified_geometric_sum_cdf(&self.spectra, horizon)?,
        })
    }

    fn target_first(&self) -> (StochasticMatrix, ProbabilityVector) {
        (self.chain.permuted(&self.order), self.pi.permuted(&self.order))
    }

    /// `max_t |P_pi(T_0 > t) - sum_j pi*(j) gamma_j^t|`.
    pub fn stationary_tail_residual(&self, horizon: usize) -> f64 {
        let (p, pi) = self.target_first();
        stationary_tail_check(&self.star, &p, &pi, horizon)
    }

    pub fn transform_check(&self, horizon: usize, points: &[f64]) -> Result<Vec<TransformPoint>> {
        let (p, pi) = self.target_first();
        transform_identity_check(&p, &pi, &self.spectra, horizon, points)
    }
}

fn spectra_of(p: &StochasticMatrix, pi: &ProbabilityVector, eps: f64) -> Result<(Spectrum, Spectrum, ReducedSpectra)> {
    let theta = reversible_spectrum(p, pi)?;
    let eta = deleted_spectrum(p, pi, 0)?;
    let reduced = reduce_spectra(&theta, &eta, eps)?;
    Ok((theta, eta, reduced))
}

/// Places column `j` of a link on the target-first chain at `order[j]`.
fn restore_columns(link: &QuasiLink, order: &[usize]) -> Result<QuasiLink> {
    let m = link.matrix();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (j, &orig) in order.iter().enumerate() {
        out.set_column(orig, &m.column(j));
    }
    QuasiLink::new(out)
}

/// Runs the whole construction for the hitting time of `target` from stationarity.
pub fn decompose(p: &StochasticMatrix, target: usize, options: &DecomposeOptions) -> Result<Decomposition> {
    p.check_index(target)?;
    let pi = stationary_distribution(p)?;
    let rev = check_reversible(p, &pi)?;
    if !rev.reversible {
        return Err(Error::NotReversible { residual: rev.residual });
    }
    let mut warnings = Vec::new();
    let mut chain = match options.shift {
        Some(c) => shift_chain(p, c)?,
        None => p.clone(),
    };
    let mut shift_applied = options.shift.filter(|c| *c > 0.0);
    let order = chain.target_first_order(target);
    let pi_q = pi.permuted(&order);
    let (mut theta, mut eta, mut spectra) = spectra_of(&chain.permuted(&order), &pi_q, options.eps_match)?;
    if let Some(c) = auto_shift(*spectra.lambdas.last().unwrap()).filter(|_| options.auto_shift) {
        warnings.push(format!("smallest surviving eigenvalue {:.6} is negative; decomposing (P + {c:.6} I) / {:.6}", spectra.lambdas.last().unwrap(), 1.0 + c));
        chain = shift_chain(&chain, c)?;
        shift_applied = Some(shift_applied.map_or(c, |c0| (1.0 + c0) * (1.0 + c) - 1.0));
        (theta, eta, spectra) = spectra_of(&chain.permuted(&order), &pi_q, options.eps_match)?;
    }
    // a cancelled pair carrying mass was a near-coincidence, not a true
    // common eigenvalue: re-pair with a tighter tolerance
    let mut eps = options.eps_match;
    let (star, workspace) = loop {
        let star = build_star_chain(&spectra)?;
        match Lambda1Workspace::new(&pi_q, &eta, &spectra, &star) {
            Ok(ws) => break (star, ws),
            Err(Error::UnmatchedMass { eigenvalue, alpha }) if eps > tol::EPS_MATCH_FLOOR => {
                eps *= 1e-3;
                warnings.push(format!(
                    "eigenvalue {eigenvalue} was matched but carries coefficient {alpha:e}; re-matching with tolerance {eps:e}"
                ));
                (theta, eta, spectra) = spectra_of(&chain.permuted(&order), &pi_q, eps)?;
            }
            Err(e) => return Err(e),
        }
    };
    spectra.shift_applied = shift_applied;
    if spectra.r() == 0 {
        warnings.push("all eigenvalues cancelled (r = 0): the hitting time is identically 0".into());
    }

    let mut spokes = Vec::with_capacity(spectra.r());
    let (mut mix, mut spoke_link) = (0.0_f64, 0.0_f64);
    for i in 1..=spectra.r() {
        let nu = spoke_distribution(&spectra, &star, i)?;
        let (a, b) = spoke_residuals(&spectra, &star, i, &nu);
        mix = mix.max(a);
        spoke_link = spoke_link.max(b);
        spokes.push(nu);
    }
    let dual = build_dual_chain(&spectra)?;
    let lambda2 = build_lambda2(&spectra, &star)?;
    let lambda1 = restore_columns(&build_lambda1(&pi_q, &spectra, &star, &workspace)?, &order)?;
    let lambda = big_link(&lambda2, &lambda1)?;

    let p_abs = make_absorbing(&chain, target)?;
    let star_abs = make_absorbing(&star.p_star, 0)?;
    let primary = Side::new(&pi, &p_abs, target);
    let star_side = Side::new(&star.pi_star, &star_abs, 0);
    let dual_side = Side::new(&dual.pi_hat, &dual.p_hat, 0);
    let certificates = Certificates {
        lambda2: certify(&lambda2, star_side, dual_side)?,
        lambda1: certify(&lambda1, primary, star_side)?,
        lambda: certify(&lambda, primary, dual_side)?,
    };
    let star_balance_residual = {
        let (m, w) = (star.p_star.matrix(), &star.pi_star);
        let n = star.p_star.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (w[i] * m[(i, j)] - w[j] * m[(j, i)]).abs())
            .fold(0.0, f64::max)
    };
    let diagnostics = Diagnostics {
        trace_residual: star.trace_residual,
        star_balance_residual,
        mix_residual: mix,
        spoke_link_residual: spoke_link,
        unmatched_alpha_max: workspace.unmatched_alpha_max,
        alpha_mass_residual: workspace.mass_residual,
        hub_mass_residual: (star.pi_star[0] - pi[target]).abs(),
        spectral_reconstruction_residual: theta.reconstruction_residual.max(eta.reconstruction_residual),
    };
    Ok(Decomposition {
        labels: p.labels().to_vec(),
        target,
        shift_applied,
        rho: spectra.rho(),
        spectra,
        star,
        spokes,
        dual,
        lambda1,
        lambda2,
        lambda,
        certificates,
        diagnostics,
        warnings,
        chain,
        pi,
        p_abs,
        workspace,
        order,
    })
}
