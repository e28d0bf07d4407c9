use nalgebra::DMatrix;
use num::{BigRational, Signed, Zero};
use serde::Serialize;

use super::spectra::ReducedSpectra;
use crate::block::BlockStructure;
use crate::error::{Error, Result};
use crate::markov::{check_reversible, stationary_distribution, ProbabilityVector, StochasticMatrix};
use crate::tol;

/// The `r`-spoke star chain with hub 0 sharing the stationary hitting law of the input.
#[derive(Debug, Clone, Serialize)]
pub struct StarChain {
    pub p_star: StochasticMatrix,
    pub pi_star: ProbabilityVector,
    /// `pi*_k` for `k = 0..=r`, each padded to length `r + 1`.
    pub prefix_laws: Vec<Vec<f64>>,
    /// `|P*(0,0) - (sum lambda - sum gamma)|`.
    pub trace_residual: f64,
}

impl StarChain {
    pub fn r(&self) -> usize {
        self.p_star.len() - 1
    }
}

/// `pi*_k(i) = (1 - rho_i) prod_{j <= k, j != i} (1 - gamma_j - rho_j (1 - gamma_i)) / (gamma_i - gamma_j)`
/// and `pi*_k(0) = prod_{j <= k} rho_j`.
pub fn prefix_law(gammas: &[f64], rho: &[f64], k: usize) -> Vec<f64> {
    let r = gammas.len();
    let mut law = vec![0.0; r + 1];
    law[0] = rho[..k].iter().product();
    for i in 0..k {
        let mut v = 1.0 - rho[i];
        for j in (0..k).filter(|&j| j != i) {
            v *= (1.0 - gammas[j] - rho[j] * (1.0 - gammas[i])) / (gammas[i] - gammas[j]);
        }
        law[i + 1] = v;
    }
    law
}

/// Builds `pi*_k`, `pi* = pi*_r` and `P*` from strictly interlacing spectra.
pub fn build_star_chain(spectra: &ReducedSpectra) -> Result<StarChain> {
    let r = spectra.r();
    let (g, rho) = (&spectra.gammas, spectra.rho());
    let prefix_laws: Vec<Vec<f64>> = (0..=r).map(|k| prefix_law(g, &rho, k)).collect();
    for (k, law) in prefix_laws.iter().enumerate() {
        if let Some(i) = (0..=k).find(|&i| law[i] <= 0.0) {
            return Err(Error::NonPositiveMass { k, state: i, value: law[i] });
        }
    }
    let pi = &prefix_laws[r];
    let mut p = DMatrix::zeros(r + 1, r + 1);
    let mut out_of_hub = 0.0;
    for i in 1..=r {
        p[(i, 0)] = 1.0 - g[i - 1];
        p[(i, i)] = g[i - 1];
        p[(0, i)] = (1.0 - g[i - 1]) * pi[i] / pi[0];
        out_of_hub += p[(0, i)];
    }
    p[(0, 0)] = 1.0 - out_of_hub;
    let trace = spectra.lambdas.iter().sum::<f64>() - g.iter().sum::<f64>();
    let trace_residual = (p[(0, 0)] - trace).abs();
    if p[(0, 0)] <= 0.0 {
        return Err(Error::NonPositiveMass { k: r, state: 0, value: p[(0, 0)] });
    }
    Ok(StarChain {
        p_star: StochasticMatrix::from_matrix(p)?,
        pi_star: ProbabilityVector::new(pi.clone())?,
        prefix_laws,
        trace_residual,
    })
}

/// The spoke-breaking law `nu_i` (`1 <= i <= r`), supported on `1..=i`.
pub fn spoke_distribution(spectra: &ReducedSpectra, star: &StarChain, i: usize) -> Result<ProbabilityVector> {
    let r = spectra.r();
    if i == 0 || i > r {
        return Err(Error::OutOfRange { n: i, min: 1, max: r });
    }
    let g = &spectra.gammas;
    let rho_i = spectra.rho()[i - 1];
    let law = &star.prefix_laws[i];
    let mut nu = vec![0.0; r + 1];
    for j in 1..i {
        nu[j] = (1.0 - g[i - 1]) / (1.0 - g[i - 1] - rho_i * (1.0 - g[j - 1])) * law[j];
    }
    // at j = i the factor 1 - rho_i cancels; dividing it out numerically loses
    // all precision when rho_i is close to 1
    let rho = spectra.rho();
    nu[i] = (0..i - 1).map(|j| (1.0 - g[j] - rho[j] * (1.0 - g[i - 1])) / (g[i - 1] - g[j])).product();
    ProbabilityVector::new(nu)
}

/// Residuals of `pi*_i = rho_i pi*_{i-1} + (1 - rho_i) nu_i` and
/// `nu_i P* = gamma_i nu_i + (1 - gamma_i) pi*_{i-1}`.
pub fn spoke_residuals(spectra: &ReducedSpectra, star: &StarChain, i: usize, nu: &ProbabilityVector) -> (f64, f64) {
    let rho_i = spectra.rho()[i - 1];
    let g = spectra.gammas[i - 1];
    let (now, before) = (&star.prefix_laws[i], &star.prefix_laws[i - 1]);
    let moved = nu.row() * star.p_star.matrix();
    let mut mix = 0.0_f64;
    let mut link = 0.0_f64;
    for j in 0..now.len() {
        mix = mix.max((now[j] - rho_i * before[j] - (1.0 - rho_i) * nu[j]).abs());
        link = link.max((moved[j] - g * nu[j] - (1.0 - g) * before[j]).abs());
    }
    (mix, link)
}

/// Hub-and-spoke check: `P(i, j) = 0` whenever `i != j` and neither is the hub.
fn check_star_shape(rows: usize, get: impl Fn(usize, usize) -> f64) -> Result<()> {
    for i in 1..rows {
        for j in (1..rows).filter(|&j| j != i) {
            let value = get(i, j);
            if value != 0.0 {
                return Err(Error::NotStarShaped { row: i, col: j, value });
            }
        }
    }
    Ok(())
}

/// Leaves grouped by equal holding probability, groups in decreasing order.
fn leaf_groups(holds: &[f64], eps: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..holds.len()).collect();
    order.sort_by(|&a, &b| holds[b].total_cmp(&holds[a]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for leaf in order {
        match groups.last_mut() {
            Some(g) if (holds[g[0]] - holds[leaf]).abs() <= eps => g.push(leaf),
            _ => groups.push(vec![leaf]),
        }
    }
    groups.iter_mut().for_each(|g| g.sort_unstable());
    groups
}

/// Collapsed star chain of a star-shaped input with hub 0.
#[derive(Debug, Clone, Serialize)]
pub struct CollapsedStar {
    pub p_star: StochasticMatrix,
    pub pi_star: ProbabilityVector,
    /// Original leaves merged into each spoke (leaf indices counted from 1).
    pub groups: Vec<Vec<usize>>,
}

/// Merges leaves with equal holding probability: `P*(0,i) = sum_{m(i)} P(0,j)`,
/// `pi*(i) = sum_{m(i)} pi(j)`, `pi*(0) = pi(0)`.
pub fn collapse_star(p: &StochasticMatrix) -> Result<CollapsedStar> {
    let m = p.matrix();
    let n = p.len();
    check_star_shape(n, |i, j| m[(i, j)])?;
    let pi = stationary_distribution(p)?;
    let holds: Vec<f64> = (1..n).map(|i| m[(i, i)]).collect();
    let groups: Vec<Vec<usize>> =
        leaf_groups(&holds, 1e-10).into_iter().map(|g| g.into_iter().map(|l| l + 1).collect()).collect();
    let r = groups.len();
    let mut q = DMatrix::zeros(r + 1, r + 1);
    let mut pi_star = vec![pi[0]; r + 1];
    for (s, group) in groups.iter().enumerate() {
        let hold = group.iter().map(|&j| m[(j, j)]).sum::<f64>() / group.len() as f64;
        q[(0, s + 1)] = group.iter().map(|&j| m[(0, j)]).sum();
        q[(s + 1, s + 1)] = hold;
        q[(s + 1, 0)] = 1.0 - hold;
        pi_star[s + 1] = group.iter().map(|&j| pi[j]).sum();
    }
    q[(0, 0)] = m[(0, 0)];
    Ok(CollapsedStar {
        p_star: StochasticMatrix::from_matrix(q)?,
        pi_star: ProbabilityVector::new(pi_star)?,
        groups,
    })
}

/// Exact collapse of a rational star chain; returns `(P*, pi*)`.
pub fn collapse_star_exact(p: &[Vec<BigRational>]) -> Result<(Vec<Vec<BigRational>>, Vec<BigRational>)> {
    let n = p.len();
    check_star_shape(n, |i, j| num::ToPrimitive::to_f64(&p[i][j]).unwrap_or(f64::NAN))?;
    if (1..n).any(|i| !p[i][0].is_positive() || !p[0][i].is_positive()) {
        return Err(Error::Reducible);
    }
    // detailed balance fixes pi(j) / pi(0) = P(0,j) / P(j,0)
    let ratio: Vec<BigRational> = (0..n)
        .map(|j| if j == 0 { num::one() } else { &p[0][j] / &p[j][0] })
        .collect();
    let total = ratio.iter().fold(BigRational::zero(), |a, b| a + b);
    let pi: Vec<BigRational> = ratio.iter().map(|v| v / &total).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (1..n).collect();
    order.sort_by(|&a, &b| p[b][b].cmp(&p[a][a]).then(a.cmp(&b)));
    for leaf in order {
        match groups.last_mut() {
            Some(g) if p[g[0]][g[0]] == p[leaf][leaf] => g.push(leaf),
            _ => groups.push(vec![leaf]),
        }
    }
    let r = groups.len();
    let mut q = vec![vec![BigRational::zero(); r + 1]; r + 1];
    let mut pi_star = vec![pi[0].clone(); r + 1];
    q[0][0] = p[0][0].clone();
    for (s, group) in groups.iter().enumerate() {
        let hold = p[group[0]][group[0]].clone();
        q[0][s + 1] = group.iter().fold(BigRational::zero(), |a, &j| a + &p[0][j]);
        q[s + 1][0] = BigRational::from_integer(1.into()) - &hold;
        q[s + 1][s + 1] = hold;
        pi_star[s + 1] = group.iter().fold(BigRational::zero(), |a, &j| a + &pi[j]);
    }
    Ok((q, pi_star))
}

/// A block star chain: hub, then blocks `(1 - c_i) Q_i`, with `c_i = w b_i`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockStarChain {
    pub p: StochasticMatrix,
    pub pi: ProbabilityVector,
    /// Hub alone in block 0, then one block per `Q_i`.
    #[serde(skip)]
    pub blocks: BlockStructure,
    pub c: Vec<f64>,
    /// Stationary laws of the `Q_i`.
    pub block_laws: Vec<ProbabilityVector>,
}

/// Assembles the block star chain from hub weights `b_0..b_k`, the hub mass
/// parameter `w` and ergodic reversible kernels `Q_1..Q_k`; verifies the
/// stationary law `(w | pi_1 | ... | pi_k) / (w + k)`.
pub fn make_block_star_chain(b: &[f64], w: f64, qs: &[StochasticMatrix]) -> Result<BlockStarChain> {
    let k = qs.len();
    if b.len() != k + 1 {
        return Err(Error::InvalidWeights(format!("{} hub weights for {k} blocks", b.len())));
    }
    if b.iter().any(|x| x.is_nan() || *x <= 0.0) || (b.iter().sum::<f64>() - 1.0).abs() > tol::ROW_SUM_REJECT {
        return Err(Error::InvalidWeights("hub weights must be positive and sum to 1".into()));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::InvalidWeights(format!("hub mass parameter {w} outside (0, 1]")));
    }
    let mut laws = Vec::with_capacity(k);
    for q in qs {
        let law = stationary_distribution(q)?;
        if !q.is_ergodic() {
            return Err(Error::InvalidWeights("block kernels must be ergodic".into()));
        }
        let rev = check_reversible(q, &law)?;
        if !rev.reversible {
            return Err(Error::NotReversible { residual: rev.residual });
        }
        laws.push(law);
    }
    let sizes: Vec<usize> = std::iter::once(1).chain(qs.iter().map(StochasticMatrix::len)).collect();
    let blocks = BlockStructure::from_sizes(&sizes)?;
    let n: usize = sizes.iter().sum();
    let c: Vec<f64> = b[1..].iter().map(|x| w * x).collect();
    let mut p = DMatrix::zeros(n, n);
    p[(0, 0)] = b[0];
    for (i, q) in qs.iter().enumerate() {
        let states = blocks.members(i + 1);
        for (a, &s) in states.iter().enumerate() {
            p[(0, s)] = b[i + 1] * laws[i][a];
            p[(s, 0)] = c[i];
            for (bb, &t) in states.iter().enumerate() {
                p[(s, t)] = (1.0 - c[i]) * q.get(a, bb);
            }
        }
    }
    let p = StochasticMatrix::from_matrix(p)?;
    let mut claimed = vec![w];
    laws.iter().for_each(|l| claimed.extend_from_slice(l.as_slice()));
    let claimed = ProbabilityVector::new(claimed.iter().map(|x| x / (w + k as f64)).collect())?;
    let pi = stationary_distribution(&p)?;
    let defect = pi.as_slice().iter().zip(claimed.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let rev = check_reversible(&p, &claimed)?;
    if defect > tol::ALGEBRAIC || !rev.reversible || !p.is_ergodic() {
        return Err(Error::InvalidWeights(format!(
            "assembled chain fails its stationary-law check (defect {defect:e}, balance {:e})",
            rev.residual
        )));
    }
    Ok(BlockStarChain { p, pi: claimed, blocks, c, block_laws: laws })
}
