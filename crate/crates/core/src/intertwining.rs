//! Links between chains: certification of `Lambda P = P^ Lambda`, composition,
//! and the sample-path linking recipe.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result, Violation};
use crate::markov::{max_abs, PathSample, PathSampler, ProbabilityVector, StochasticMatrix};
use crate::tol;

/// A matrix with unit row sums; stochastic when additionally nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLink {
    matrix: DMatrix<f64>,
    is_stochastic: bool,
}

impl QuasiLink {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let bad: Vec<Violation> = (0..matrix.nrows())
            .filter_map(|i| {
                let sum = matrix.row(i).sum();
                ((sum - 1.0).abs() > tol::ALGEBRAIC).then(|| Violation::RowSumViolation {
                    row: i,
                    sum,
                    most_negative: matrix.row(i).min().min(0.0),
                })
            })
            .collect();
        if !bad.is_empty() {
            return Err(Error::InvalidMatrix(bad));
        }
        let is_stochastic = matrix.iter().all(|v| *v >= -tol::STOCHASTIC_FLOOR);
        Ok(QuasiLink { matrix, is_stochastic })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        Self::new(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        QuasiLink { matrix: DMatrix::identity(n, n), is_stochastic: true }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Dual state count.
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Primary state count.
    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_stochastic(&self) -> bool {
        self.is_stochastic
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.min()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.nrows()).map(|i| (self.matrix.row(i).sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

impl Serialize for QuasiLink {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

/// One side of an intertwining: initial law, kernel and absorbing target.
#[derive(Debug, Clone, Copy)]
pub struct Side<'a> {
    pub init: &'a ProbabilityVector,
    pub kernel: &'a StochasticMatrix,
    pub target: usize,
}

impl<'a> Side<'a> {
    pub fn new(init: &'a ProbabilityVector, kernel: &'a StochasticMatrix, target: usize) -> Self {
        Side { init, kernel, target }
    }
}

/// Residuals of the three intertwining identities (max absolute entry).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntertwiningCertificate {
    pub residual_semigroup: f64,
    pub residual_initial: f64,
    pub residual_absorption: f64,
    pub stochastic: bool,
}

impl IntertwiningCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residual_semigroup.max(self.residual_initial).max(self.residual_absorption)
    }

    pub fn passes(&self, tolerance: f64, absorption_tolerance: f64) -> bool {
        self.residual_semigroup <= tolerance
            && self.residual_initial <= tolerance
            && self.residual_absorption <= absorption_tolerance
    }
}

fn check_dims(link: &QuasiLink, primary: Side<'_>, dual: Side<'_>) -> Result<()> {
    let dims = [
        ("primary kernel", link.ncols(), primary.kernel.len()),
        ("primary initial law", link.ncols(), primary.init.len()),
        ("dual kernel", link.nrows(), dual.kernel.len()),
        ("dual initial law", link.nrows(), dual.init.len()),
    ];
    for (context, expected, found) in dims {
        if expected != found {
            return Err(Error::DimensionMismatch { context, expected, found });
        }
    }
    primary.kernel.check_index(primary.target)?;
    dual.kernel.check_index(dual.target)?;
    Ok(())
}

/// Certifies `Lambda P = P^ Lambda`, `pi0 = pi^0 Lambda` and `Lambda delta_0^T = delta_0^^T`.
pub fn certify(link: &QuasiLink, primary: Side<'_>, dual: Side<'_>) -> Result<IntertwiningCertificate> {
    certify_rows(link, primary, dual, 0..link.nrows())
}

/// As [`certify`], with the semigroup identity checked only on the dual rows
/// in `rows`. Used for truncated duals whose boundary row is not closed.
pub fn certify_rows(
    link: &QuasiLink,
    primary: Side<'_>,
    dual: Side<'_>,
    rows: Range<usize>,
) -> Result<IntertwiningCertificate> {
    check_dims(link, primary, dual)?;
    let lhs = link.matrix() * primary.kernel.matrix();
    let rhs = dual.kernel.matrix() * link.matrix();
    let residual_semigroup = max_abs(&(lhs - rhs).rows(rows.start, rows.len()));
    let residual_initial = max_abs(&(dual.init.row() * link.matrix() - primary.init.row()));
    let residual_absorption = check_absorption_column(link, primary.target, dual.target);
    Ok(IntertwiningCertificate {
        residual_semigroup,
        residual_initial,
        residual_absorption,
        stochastic: link.is_stochastic(),
    })
}

/// `max |Lambda(:, target) - delta_{dual_target}^T|`.
pub fn check_absorption_column(link: &QuasiLink, target: usize, dual_target: usize) -> f64 {
    (0..link.nrows())
        .map(|i| {
            let want = if i == dual_target { 1.0 } else { 0.0 };
            (link.get(i, target) - want).abs()
        })
        .fold(0.0, f64::max)
}

/// `Lambda2 Lambda1`; stochastic if both factors are, otherwise decided by the entries.
pub fn compose(outer: &QuasiLink, inner: &QuasiLink) -> Result<QuasiLink> {
    if outer.ncols() != inner.nrows() {
        return Err(Error::DimensionMismatch { context: "link composition", expected: outer.ncols(), found: inner.nrows() });
    }
    let mut out = QuasiLink::new(outer.matrix() * inner.matrix())?;
    out.is_stochastic |= outer.is_stochastic && inner.is_stochastic;
    Ok(out)
}

/// `max_t max |pi0 P^t - pi^0 P^^t Lambda|` for `t <= horizon`.
pub fn propagation_residual(link: &QuasiLink, primary: Side<'_>, dual: Side<'_>, horizon: usize) -> Result<f64> {
    check_dims(link, primary, dual)?;
    let mut x = primary.init.row().clone();
    let mut y = dual.init.row().clone();
    let mut worst = 0.0_f64;
    for t in 0..=horizon {
        if t > 0 {
            x = &x * primary.kernel.matrix();
            y = &y * dual.kernel.matrix();
        }
        worst = worst.max(max_abs(&(&y * link.matrix() - &x)));
    }
    Ok(worst)
}

/// Primary trajectory together with a linked dual trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkedPathPair {
    pub primary_path: Vec<usize>,
    pub dual_path: Vec<usize>,
    pub seed: u64,
}

/// Precomputed state for the linking recipe with `Delta = P^ Lambda`.
#[derive(Debug, Clone)]
pub struct Linker {
    link: DMatrix<f64>,
    dual_kernel: DMatrix<f64>,
    dual_init: Vec<f64>,
    primary_init: Vec<f64>,
    delta: DMatrix<f64>,
}

impl Linker {
    /// Fails unless the link is stochastic and certifies to `1e-9`.
    pub fn new(link: &QuasiLink, primary: Side<'_>, dual: Side<'_>) -> Result<Self> {
        if !link.is_stochastic() {
            return Err(Error::NotStochasticLink);
        }
        let cert = certify(link, primary, dual)?;
        let worst = cert.residual_semigroup.max(cert.residual_initial);
        if worst > 1e-9 {
            return Err(Error::CertificateFailed { residual: worst, tolerance: 1e-9 });
        }
        Ok(Linker {
            link: link.matrix().clone(),
            dual_kernel: dual.kernel.matrix().clone(),
            dual_init: dual.init.to_vec(),
            primary_init: primary.init.to_vec(),
            delta: dual.kernel.matrix() * link.matrix(),
        })
    }

    fn initial_weights(&self, x0: usize) -> Result<Vec<f64>> {
        let denom = self.primary_init[x0];
        if denom <= 0.0 {
            return Err(Error::ZeroDenominator { step: 0, dual_state: usize::MAX, primary_state: x0 });
        }
        Ok((0..self.link.nrows()).map(|d| self.dual_init[d] * self.link[(d, x0)] / denom).collect())
    }

    fn step_weights(&self, step: usize, prev: usize, x: usize) -> Result<Vec<f64>> {
        let denom = self.delta[(prev, x)];
        if denom <= 0.0 {
            return Err(Error::ZeroDenominator { step, dual_state: prev, primary_state: x });
        }
        Ok((0..self.link.nrows()).map(|d| self.dual_kernel[(prev, d)] * self.link[(d, x)] / denom).collect())
    }

    fn draw<R: Rng + ?Sized>(step: usize, weights: &[f64], rng: &mut R) -> Result<usize> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol::ALGEBRAIC {
            return Err(Error::LinkWeightSum { step, sum });
        }
        let u: f64 = rng.random::<f64>() * sum;
        let mut acc = 0.0;
        let mut last = 0;
        for (d, w) in weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = d;
            if u < acc {
                return Ok(d);
            }
        }
        Ok(last)
    }

    /// Builds the dual trajectory for a given primary trajectory.
    pub fn link_path<R: Rng + ?Sized>(&self, primary: &[usize], rng: &mut R) -> Result<Vec<usize>> {
        let mut dual = Vec::with_capacity(primary.len());
        let Some(&x0) = primary.first() else {
            return Ok(dual);
        };
        let mut prev = Self::draw(0, &self.initial_weights(x0)?, rng)?;
        dual.push(prev);
        for (t, &x) in primary.iter().enumerate().skip(1) {
            prev = Self::draw(t, &self.step_weights(t, prev, x)?, rng)?;
            dual.push(prev);
        }
        Ok(dual)
    }

    /// Simulates the primary chain and links it on the fly, stopping once the
    /// primary chain enters `stop` or after `max_length` steps.
    pub fn co_generate<R: Rng + ?Sized>(
        &self,
        sampler: &PathSampler,
        max_length: usize,
        stop: usize,
        rng: &mut R,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        let primary = sampler.sample_until(max_length, stop, rng);
        let dual = self.link_path(&primary, rng)?;
        Ok((primary, dual))
    }
}

/// Links one pre-generated primary path.
pub fn sample_path_link(
    primary_path: &PathSample,
    link: &QuasiLink,
    primary: Side<'_>,
    dual: Side<'_>,
    seed: u64,
) -> Result<LinkedPathPair> {
    let linker = Linker::new(link, primary, dual)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dual_path = linker.link_path(&primary_path.states, &mut rng)?;
    Ok(LinkedPathPair { primary_path: primary_path.states.clone(), dual_path, seed })
}

/// Aggregated Monte Carlo statistics over many linked path pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkStats {
    pub paths: usize,
    /// Pairs whose absorption times agree (both absorbed at the same step or neither absorbed).
    pub absorption_agreements: usize,
    pub checkpoints: Vec<usize>,
    /// `counts[c][d][x]`: number of pairs with dual state `d` and primary state
    /// `x` at time `checkpoints[c]` (paths already absorbed stay at their target).
    pub counts: Vec<Vec<Vec<u64>>>,
}

/// One cell of the conditional-law comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalCell {
    pub t: usize,
    pub dual_state: usize,
    pub primary_state: usize,
    pub observations: u64,
    pub expected: f64,
    pub empirical: f64,
    pub within: bool,
}

/// Chi-square statistic of one conditional row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalRow {
    pub t: usize,
    pub dual_state: usize,
    pub observations: u64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
}

impl LinkStats {
    /// Compares the empirical law of `X_t` given `X^_t = d` with `Lambda(d, .)`
    /// for every row with at least `min_observations` samples; a cell is within
    /// tolerance when it lies inside `z` binomial standard errors.
    pub fn conditional_cells(&self, link: &QuasiLink, z: f64, min_observations: u64) -> (Vec<ConditionalCell>, Vec<ConditionalRow>) {
        let mut cells = Vec::new();
        let mut rows = Vec::new();
        for (c, &t) in self.checkpoints.iter().enumerate() {
            for (d, row) in self.counts[c].iter().enumerate() {
                let total: u64 = row.iter().sum();
                if total < min_observations {
                    continue;
                }
                let mut chi = 0.0;
                let mut dof = 0usize;
                for (x, &k) in row.iter().enumerate() {
                    let p = link.get(d, x).clamp(0.0, 1.0);
                    let empirical = k as f64 / total as f64;
                    let se = (p * (1.0 - p) / total as f64).sqrt();
                    let within = (empirical - p).abs() <= z * se + 1e-12;
                    if p > 0.0 {
                        chi += (k as f64 - total as f64 * p).powi(2) / (total as f64 * p);
                        dof += 1;
                    }
                    cells.push(ConditionalCell {
                        t,
                        dual_state: d,
                        primary_state: x,
                        observations: total,
                        expected: p,
                        empirical,
                        within,
                    });
                }
                rows.push(ConditionalRow {
                    t,
                    dual_state: d,
                    observations: total,
                    chi_square: chi,
                    degrees_of_freedom: dof.saturating_sub(1),
                });
            }
        }
        (cells, rows)
    }

    fn merge(&mut self, other: LinkStats) {
        self.paths += other.paths;
        self.absorption_agreements += other.absorption_agreements;
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        }
    }
}

/// Settings for [`simulate_linked`].
#[derive(Debug, Clone)]
pub struct LinkSimConfig {
    pub paths: usize,
    pub max_length: usize,
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    /// Worker `w` uses seed `seed + w` and the `w`-th contiguous chunk of paths.
    pub workers: usize,
}

/// Generates primary paths from `primary`, links each, and tallies agreement of
/// absorption times and the conditional law at the checkpoints.
pub fn simulate_linked(link: &QuasiLink, primary: Side<'_>, dual: Side<'_>, config: &LinkSimConfig) -> Result<LinkStats> {
    let linker = Linker::new(link, primary, dual)?;
    let sampler = PathSampler::new(primary.init, primary.kernel);
    let workers = config.workers.max(1);
    let chunk = config.paths.div_ceil(workers);
    let empty = || LinkStats {
        paths: 0,
        absorption_agreements: 0,
        checkpoints: config.checkpoints.clone(),
        counts: vec![vec![vec![0; link.ncols()]; link.nrows()]; config.checkpoints.len()],
    };
    let run = |w: usize| -> Result<LinkStats> {
        let mut stats = empty();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(w as u64));
        let n = chunk.min(config.paths.saturating_sub(w * chunk));
        for _ in 0..n {
            let (xs, ds) = linker.co_generate(&sampler, config.max_length, primary.target, &mut rng)?;
            let tx = xs.iter().position(|&s| s == primary.target);
            let td = ds.iter().position(|&s| s == dual.target);
            stats.paths += 1;
            stats.absorption_agreements += (tx == td) as usize;
            for (c, &t) in config.checkpoints.iter().enumerate() {
                let (x, d) = match (xs.get(t), ds.get(t)) {
                    (Some(&x), Some(&d)) => (x, d),
                    _ if tx.is_some() => (primary.target, dual.target),
                    _ => continue,
                };
                stats.counts[c][d][x] += 1;
            }
        }
        Ok(stats)
    };
    let results: Vec<Result<LinkStats>> = if workers == 1 {
        vec![run(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers).map(|w| s.spawn(move || run(w))).collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut total = empty();
    for r in results {
        total.merge(r?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::markov::{make_absorbing, sample_path, stationary_distribution};

    #[test]
    fn identity_link_is_exact() {
        let p = make_absorbing(&fixtures::six_state_star(), 0).unwrap();
        let pi0 = ProbabilityVector::uniform(6);
        let id = QuasiLink::identity(6);
        let side = Side::new(&pi0, &p, 0);
        let cert = certify(&id, side, side).unwrap();
        assert_eq!(cert.max_residual(), 0.0);
        assert!(cert.stochastic);
        assert_eq!(check_absorption_column(&id, 0, 0), 0.0);
    }

    #[test]
    fn perturbed_link_is_detected() {
        let p = fixtures::two_state();
        let pi = stationary_distribution(&p).unwrap();
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] += 1e-3;
        let s = m.row(0).sum();
        m.row_mut(0).unscale_mut(s);
        let link = QuasiLink::new(m.clone()).unwrap();
        let side = Side::new(&pi, &p, 0);
        let cert = certify(&link, side, side).unwrap();
        // oracle: direct product difference
        let direct = max_abs(&(&m * p.matrix() - p.matrix() * &m));
        assert!((cert.residual_semigroup - direct).abs() < 1e-15);
        assert!(cert.residual_semigroup > 1e-4);
    }

    #[test]
    fn dimension_mismatch() {
        let p = fixtures::two_state();
        let pi = ProbabilityVector::uniform(2);
        let link = QuasiLink::identity(3);
        let side = Side::new(&pi, &p, 0);
        assert!(matches!(certify(&link, side, side), Err(Error::DimensionMismatch { .. })));
        assert!(compose(&QuasiLink::identity(2), &link).is_err());
    }

    #[test]
    fn compose_identities() {
        let c = compose(&QuasiLink::identity(3), &QuasiLink::identity(3)).unwrap();
        assert_eq!(c, QuasiLink::identity(3));
    }

    #[test]
    fn row_sums_enforced() {
        assert!(QuasiLink::from_rows(&[vec![0.5, 0.4]]).is_err());
        let q = QuasiLink::from_rows(&[vec![1.5, -0.5]]).unwrap();
        assert!(!q.is_stochastic());
    }

    #[test]
    fn identity_linking_copies_path() {
        let p = fixtures::two_state();
        let pi = stationary_distribution(&p).unwrap();
        let path = sample_path(&pi, &p, 200, 3);
        let side = Side::new(&pi, &p, 0);
        let pair = sample_path_link(&path, &QuasiLink::identity(2), side, side, 11).unwrap();
        assert_eq!(pair.dual_path, pair.primary_path);
    }

    #[test]
    fn non_stochastic_link_refused() {
        let p = fixtures::two_state();
        let pi = stationary_distribution(&p).unwrap();
        let path = sample_path(&pi, &p, 5, 3);
        let side = Side::new(&pi, &p, 0);
        let q = QuasiLink::from_rows(&[vec![1.5, -0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(sample_path_link(&path, &q, side, side, 1), Err(Error::NotStochasticLink));
    }

    #[test]
    fn impossible_path_reports_zero_denominator() {
        let p = StochasticMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pi = ProbabilityVector::uniform(2);
        let side = Side::new(&pi, &p, 0);
        let linker = Linker::new(&QuasiLink::identity(2), side, side).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = linker.link_path(&[0, 0], &mut rng).unwrap_err();
        assert!(matches!(err, Error::ZeroDenominator { step: 1, .. }));
    }
}
