//! The partition chain of the Moran model: exact construction, its
//! pure-decay bidiagonal dual, and the geometric decomposition of the
//! absorption time.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::Serialize;

use crate::block::BlockStructure;
use crate::error::{Error, Result};
use crate::intertwining::{certify, IntertwiningCertificate, QuasiLink, Side};
use crate::markov::{
    convolve_truncated, geometric_pmf, hitting_time_cdf, unit_mass, HittingCdf, ProbabilityVector, StochasticMatrix,
};

pub const MAX_N: usize = 30;

/// Weakly decreasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct IntegerPartition {
    parts: Vec<usize>,
}

impl IntegerPartition {
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidDistribution(format!("{parts:?} is not a partition")));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(IntegerPartition { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// `t! / prod_i r_i!` where `r_i` counts parts equal to `i`.
    pub fn multinomial(&self) -> BigInt {
        let mut out = factorial(self.parts.len());
        for run in self.parts.chunk_by(|a, b| a == b) {
            out /= factorial(run.len());
        }
        out
    }
}

impl std::fmt::Display for IntegerPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: usize, k: usize) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if (min..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(Error::OutOfRange { n, min, max: MAX_N })
    }
}

fn partitions_into(n: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<IntegerPartition>) {
    if n == 0 {
        out.push(IntegerPartition { parts: prefix.clone() });
        return;
    }
    for part in (1..=max_part.min(n)).rev() {
        prefix.push(part);
        partitions_into(n - part, part, prefix, out);
        prefix.pop();
    }
}

/// All partitions of `n`, ordered by decreasing number of parts and, within
/// a block, lexicographically increasing. For `n = 4`:
/// `(1,1,1,1), (2,1,1), (2,2), (3,1), (4)`.
pub fn enumerate_partitions(n: usize) -> Result<Vec<IntegerPartition>> {
    check_n(n, 1)?;
    let mut out = Vec::new();
    partitions_into(n, n, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| b.num_parts().cmp(&a.num_parts()).then_with(|| a.parts.cmp(&b.parts)));
    Ok(out)
}

/// The partition chain with its exact rational kernel.
#[derive(Debug, Clone)]
pub struct PartitionChain {
    pub n: usize,
    pub states: Vec<IntegerPartition>,
    pub exact: Vec<Vec<BigRational>>,
    pub p: StochasticMatrix,
}

impl PartitionChain {
    /// Index of `(1, ..., 1)`.
    pub fn start(&self) -> usize {
        0
    }

    /// Index of the absorbing partition `(n)`.
    pub fn target(&self) -> usize {
        self.states.len() - 1
    }

    /// States grouped by part count, `n` parts first.
    pub fn blocks(&self) -> BlockStructure {
        BlockStructure::new(self.states.iter().map(|s| self.n - s.num_parts()).collect())
            .expect("every part count occurs")
    }
}

/// Choose an ordered pair of distinct objects and move the second into the
/// subset of the first.
pub fn moran_matrix(n: usize) -> Result<PartitionChain> {
    let states = enumerate_partitions(n)?;
    let index: HashMap<&IntegerPartition, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let pairs = BigInt::from(n * n.saturating_sub(1));
    let size = states.len();
    let mut exact = vec![vec![BigRational::zero(); size]; size];
    for (row, state) in states.iter().enumerate() {
        if n == 1 {
            exact[row][row] = BigRational::one();
            continue;
        }
        let parts = state.parts();
        let mut stay = BigInt::zero();
        for (i, &ni) in parts.iter().enumerate() {
            stay += BigInt::from(ni * (ni - 1));
            for (j, &nj) in parts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let mut next = parts.to_vec();
                next[i] += 1;
                next[j] -= 1;
                next.retain(|&p| p > 0);
                let next = IntegerPartition::new(next).expect("parts stay positive");
                let col = index[&next];
                exact[row][col] += BigRational::new(BigInt::from(ni * nj), pairs.clone());
            }
        }
        exact[row][row] += BigRational::new(stay, pairs.clone());
        debug_assert!(exact[row].iter().fold(BigRational::zero(), |a, b| a + b).is_one());
    }
    let labels = states.iter().map(ToString::to_string).collect();
    let rows = exact.iter().map(|r| r.iter().map(to_f64).collect()).collect();
    let p = StochasticMatrix::with_labels(labels, rows)?;
    Ok(PartitionChain { n, states, exact, p })
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("bounded rational")
}

/// `mu_t(r) = m_r / C(n-1, t-1)` over the partitions with `t` parts, in chain order.
pub fn block_law_exact(n: usize, t: usize) -> Result<Vec<(IntegerPartition, BigRational)>> {
    check_n(n, 1)?;
    if t == 0 || t > n {
        return Err(Error::OutOfRange { n: t, min: 1, max: n });
    }
    let denom = binomial(n - 1, t - 1);
    Ok(enumerate_partitions(n)?
        .into_iter()
        .filter(|s| s.num_parts() == t)
        .map(|s| {
            let w = BigRational::new(s.multinomial(), denom.clone());
            (s, w)
        })
        .collect())
}

/// `lambda_t = 1 - t(t-1) / (n(n-1))`.
pub fn moran_lambda(n: usize, t: usize) -> BigRational {
    BigRational::one() - BigRational::new(BigInt::from(t * (t - 1)), BigInt::from(n * (n - 1)))
}

/// The bidiagonal dual on `n, n-1, ..., 1` and its link.
#[derive(Debug, Clone, Serialize)]
pub struct MoranDual {
    /// `lambda_n, ..., lambda_1`.
    pub lambdas: Vec<f64>,
    pub p_hat: StochasticMatrix,
    pub link: QuasiLink,
}

pub fn moran_dual(n: usize) -> Result<MoranDual> {
    check_n(n, 2)?;
    let states = enumerate_partitions(n)?;
    let lambdas: Vec<f64> = (1..=n).rev().map(|t| to_f64(&moran_lambda(n, t))).collect();
    let mut p_hat = DMatrix::zeros(n, n);
    for (i, &l) in lambdas.iter().enumerate() {
        p_hat[(i, i)] = l;
        if i + 1 < n {
            p_hat[(i, i + 1)] = 1.0 - l;
        }
    }
    let mut link = DMatrix::zeros(n, states.len());
    for (row, t) in (1..=n).rev().enumerate() {
        let law: HashMap<IntegerPartition, BigRational> = block_law_exact(n, t)?.into_iter().collect();
        for (col, s) in states.iter().enumerate() {
            if let Some(w) = law.get(s) {
                link[(row, col)] = to_f64(w);
            }
        }
    }
    let labels = (1..=n).rev().map(|t| t.to_string()).collect();
    Ok(MoranDual {
        lambdas,
        p_hat: StochasticMatrix::from_matrix_labelled(labels, p_hat)?,
        link: QuasiLink::new(link)?,
    })
}

/// Certifies the dual against `(delta_(1,...,1), P)` and `(delta_n, P^)`.
pub fn moran_certificate(n: usize) -> Result<IntertwiningCertificate> {
    let chain = moran_matrix(n)?;
    let dual = moran_dual(n)?;
    let init = ProbabilityVector::point_mass(chain.states.len(), chain.start());
    let dual_init = ProbabilityVector::point_mass(n, 0);
    certify(
        &dual.link,
        Side::new(&init, &chain.p, chain.target()),
        Side::new(&dual_init, &dual.p_hat, n - 1),
    )
}

/// Exact mean and variance of the absorption time from `(1, ..., 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoranMoments {
    pub mean: f64,
    pub variance: f64,
    #[serde(skip)]
    pub mean_exact: BigRational,
    #[serde(skip)]
    pub variance_exact: BigRational,
}

/// Mean `(n-1)^2` and variance `2[n(n-1)]^2 H2_n - (n-1)^2 (3n^2 - 2n + 2)`,
/// both in exact arithmetic.
pub fn moran_moments(n: usize) -> Result<MoranMoments> {
    check_n(n, 2)?;
    let int = |v: usize| BigRational::from_integer(BigInt::from(v));
    let h2 = (1..=n).fold(BigRational::zero(), |acc, j| acc + BigRational::new(BigInt::one(), BigInt::from(j * j)));
    let nn1 = int(n * (n - 1));
    let mean_exact = int((n - 1) * (n - 1));
    let variance_exact = int(2) * &nn1 * &nn1 * h2 - &mean_exact * int(3 * n * n - 2 * n + 2);
    Ok(MoranMoments { mean: to_f64(&mean_exact), variance: to_f64(&variance_exact), mean_exact, variance_exact })
}

/// Law of `sum_{t=2}^n Geo(1 - lambda_t)` on `0..=horizon`.
pub fn geometric_sum_cdf(n: usize, horizon: usize) -> Result<HittingCdf> {
    check_n(n, 2)?;
    let pmf = (2..=n).fold(unit_mass(horizon), |acc, t| {
        let success = 1.0 - to_f64(&moran_lambda(n, t));
        convolve_truncated(&acc, &geometric_pmf(success, horizon), horizon)
    });
    Ok(HittingCdf::from_pmf(&pmf))
}

/// Exact absorption-time CDF of the partition chain from `(1, ..., 1)`.
pub fn absorption_cdf(n: usize, horizon: usize) -> Result<HittingCdf> {
    let chain = moran_matrix(n)?;
    let init = ProbabilityVector::point_mass(chain.states.len(), chain.start());
    hitting_time_cdf(&init, &chain.p, chain.target(), horizon)
}

/// `max_t |P(T <= t) - P(sum Y_t <= t)|` over `t <= horizon`.
pub fn geometric_decomposition_check(n: usize, horizon: usize) -> Result<f64> {
    Ok(absorption_cdf(n, horizon)?.max_discrepancy(&geometric_sum_cdf(n, horizon)?))
}

/// `(E T / n^2, Var T / n^4)`.
pub fn scaled_moments(n: usize) -> Result<(f64, f64)> {
    let m = moran_moments(n)?;
    let n = n as f64;
    Ok((m.mean / (n * n), m.variance / n.powi(4)))
}

/// Mean and variance of `sum_{j>=2} Exp(j(j-1))`: `1` and `pi^2/3 - 3`.
pub fn scaled_limit_moments() -> (f64, f64) {
    (1.0, std::f64::consts::PI.powi(2) / 3.0 - 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn partition_order() {
        let names: Vec<String> = enumerate_partitions(4).unwrap().iter().map(ToString::to_string).collect();
        assert_eq!(names, ["(1,1,1,1)", "(2,1,1)", "(2,2)", "(3,1)", "(4)"]);
        assert_eq!(enumerate_partitions(1).unwrap().len(), 1);
        // partition function p(n)
        let p = [1, 2, 3, 5, 7, 11, 15, 22, 30, 42];
        for (n, &count) in (1..=10).zip(&p) {
            assert_eq!(enumerate_partitions(n).unwrap().len(), count);
        }
        assert!(enumerate_partitions(0).is_err() && enumerate_partitions(31).is_err());
    }

    #[test]
    fn six_object_row() {
        let chain = moran_matrix(6).unwrap();
        let find = |v: &[usize]| chain.states.iter().position(|s| s.parts() == v).unwrap();
        let row = &chain.exact[find(&[4, 1, 1])];
        assert_eq!(row[find(&[5, 1])], r(8, 30));
        assert_eq!(row[find(&[4, 2])], r(2, 30));
        assert_eq!(row[find(&[3, 2, 1])], r(8, 30));
        assert_eq!(row[find(&[4, 1, 1])], r(12, 30));
    }

    #[test]
    fn four_object_matrix() {
        let chain = moran_matrix(4).unwrap();
        let want = [
            [0, 12, 0, 0, 0],
            [0, 6, 2, 4, 0],
            [0, 0, 4, 8, 0],
            [0, 0, 3, 6, 3],
            [0, 0, 0, 0, 12],
        ];
        for (i, row) in want.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(chain.exact[i][j], r(v, 12));
            }
        }
        let two = moran_matrix(2).unwrap();
        assert_eq!(two.p.rows(), vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn block_bidiagonal_and_exact_laws() {
        for n in 2..=12 {
            let chain = moran_matrix(n).unwrap();
            for (i, x) in chain.states.iter().enumerate() {
                for (j, y) in chain.states.iter().enumerate() {
                    if !chain.exact[i][j].is_zero() {
                        assert!(y.num_parts() == x.num_parts() || y.num_parts() + 1 == x.num_parts());
                    }
                }
            }
            for t in 1..=n {
                let sum = block_law_exact(n, t).unwrap().into_iter().fold(BigRational::zero(), |a, (_, w)| a + w);
                assert!(sum.is_one(), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn dual_for_four() {
        let dual = moran_dual(4).unwrap();
        assert_eq!(dual.lambdas, vec![0.0, 0.5, 5.0 / 6.0, 1.0]);
        assert!((dual.link.get(2, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((dual.link.get(2, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(dual.link.get(0, 0), 1.0);
        assert_eq!(moran_lambda(4, 2), r(5, 6));
    }

    #[test]
    fn certificates() {
        for n in 2..=8 {
            let cert = moran_certificate(n).unwrap();
            assert!(cert.max_residual() <= 1e-12, "n={n}: {cert:?}");
            assert!(cert.stochastic);
        }
    }

    #[test]
    fn moments() {
        let m = moran_moments(4).unwrap();
        assert_eq!(m.mean_exact, r(9, 1));
        assert_eq!(m.variance_exact, r(32, 1));
        let two = moran_moments(2).unwrap();
        assert_eq!((two.mean, two.variance), (1.0, 0.0));
        // against the sum of geometric variances
        for n in 2..=12 {
            let mut var = BigRational::zero();
            for k in 2..=n {
                let m = BigRational::new(BigInt::from(n * (n - 1)), BigInt::from(k * (k - 1)));
                var += &m * &m - &m;
            }
            assert_eq!(moran_moments(n).unwrap().variance_exact, var);
        }
    }

    #[test]
    fn moments_from_cdf() {
        for n in 2..=8 {
            let m = moran_moments(n).unwrap();
            let (mean, var) = absorption_cdf(n, 6000).unwrap().moments();
            assert!((mean - m.mean).abs() < 1e-6, "n={n}");
            assert!((var - m.variance).abs() < 1e-6, "n={n}");
        }
    }

    #[test]
    fn geometric_decomposition() {
        assert_eq!(geometric_decomposition_check(2, 10).unwrap(), 0.0);
        assert!(geometric_decomposition_check(4, 400).unwrap() <= 1e-10);
        assert!(geometric_decomposition_check(6, 1000).unwrap() <= 1e-9);
    }

    #[test]
    fn scaled_limit() {
        let (m, v) = scaled_limit_moments();
        let (sm, sv) = scaled_moments(30).unwrap();
        assert!((sm - m).abs() < 0.07 && (sv - v).abs() < 0.03);
        let (sm10, sv10) = scaled_moments(10).unwrap();
        assert!((sm - m).abs() < (sm10 - m).abs() && (sv - v).abs() < (sv10 - v).abs());
    }
}
