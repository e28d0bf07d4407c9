//! Block chains: Perron left vectors of diagonal blocks, the proportionality
//! defect, and the collapsed block-level dual with its link.

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intertwining::QuasiLink;
use crate::markov::{is_irreducible, ProbabilityVector, StochasticMatrix};

const PLAIN_ITERATIONS: usize = 1_000;
const MAX_ITERATIONS: usize = 100_000;
const PERRON_TOL: f64 = 1e-13;

/// Assignment of states to contiguous block indices `0..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BlockSpec")]
pub struct BlockStructure {
    block_of: Vec<usize>,
    #[serde(skip)]
    members: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct BlockSpec {
    block_of: Vec<usize>,
}

impl TryFrom<BlockSpec> for BlockStructure {
    type Error = Error;
    fn try_from(spec: BlockSpec) -> Result<Self> {
        BlockStructure::new(spec.block_of)
    }
}

impl BlockStructure {
    pub fn new(block_of: Vec<usize>) -> Result<Self> {
        if block_of.is_empty() {
            return Err(Error::InvalidBlocks("no states".into()));
        }
        let k = *block_of.iter().max().unwrap();
        let mut members = vec![Vec::new(); k + 1];
        for (s, &b) in block_of.iter().enumerate() {
            members[b].push(s);
        }
        if let Some(b) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidBlocks(format!("block {b} is empty; indices must be contiguous")));
        }
        Ok(BlockStructure { block_of, members })
    }

    /// Blocks of the given sizes laid out consecutively.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        Self::new(sizes.iter().enumerate().flat_map(|(b, &n)| std::iter::repeat_n(b, n)).collect())
    }

    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    pub fn num_blocks(&self) -> usize {
        self.members.len()
    }

    pub fn num_states(&self) -> usize {
        self.block_of.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// States of block `b` in increasing order.
    pub fn members(&self, b: usize) -> &[usize] {
        &self.members[b]
    }

    /// The submatrix `P_ij`.
    pub fn sub_block(&self, p: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
        let (ri, cj) = (&self.members[i], &self.members[j]);
        DMatrix::from_fn(ri.len(), cj.len(), |a, b| p[(ri[a], cj[b])])
    }
}

/// Perron root and normalized left Perron vector of a nonnegative square matrix.
///
/// Power iteration from the uniform vector; periodic or nilpotent blocks are
/// handled by iterating `A + I` instead, whose Perron root is `rho(A) + 1`;
/// an iterate mapped to zero is an exact null vector.
pub fn perron_left_vector(a: &DMatrix<f64>) -> Result<(f64, ProbabilityVector)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch { context: "perron block", expected: n, found: a.ncols() });
    }
    if let Some(v) = a.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDistribution(format!("block entry {v} is not a nonnegative number")));
    }
    let residual = |v: &RowDVector<f64>, rho: f64| (v * a - v * rho).amax();
    let start = RowDVector::from_element(n, 1.0 / n as f64);

    let mut v = start.clone();
    for _ in 0..PLAIN_ITERATIONS {
        let w = &v * a;
        let rho = w.sum();
        if rho <= 0.0 {
            // v A = 0: v is itself a left eigenvector for the root 0
            return Ok((0.0, ProbabilityVector::new(v.iter().copied().collect())?));
        }
        let next = w / rho;
        let moved = (&next - &v).amax();
        v = next;
        if moved <= PERRON_TOL && residual(&v, rho) <= PERRON_TOL {
            return Ok((rho, ProbabilityVector::new(v.iter().copied().collect())?));
        }
    }

    let shifted = a + DMatrix::identity(n, n);
    let mut v = start;
    let mut rho = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let w = &v * &shifted;
        rho = w.sum() - 1.0;
        let next = w / (rho + 1.0);
        let moved = (&next - &v).amax();
        v = next;
        if moved <= PERRON_TOL && residual(&v, rho) <= PERRON_TOL {
            return Ok((rho, ProbabilityVector::new(v.iter().copied().collect())?));
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual: residual(&v, rho) })
}

/// Block-level dual of a block chain.
#[derive(Debug, Clone, Serialize)]
pub struct BlockDual {
    pub p_hat: StochasticMatrix,
    pub mu: Vec<ProbabilityVector>,
    pub spectral_radii: Vec<f64>,
    /// `max_{i,j} || mu_i P_ij - P^(i,j) mu_j ||_inf`.
    pub residual: f64,
    /// Diagonal blocks whose positive graph is not strongly connected; their
    /// Perron vector need not be unique.
    pub reducible_blocks: Vec<usize>,
}

/// Computes the Perron vectors and `P^(i,j) = (mu_i P_ij) 1^T`, reporting
/// (not rejecting) the proportionality defect.
pub fn fit_block_dual(p: &StochasticMatrix, blocks: &BlockStructure) -> Result<BlockDual> {
    if p.len() != blocks.num_states() {
        return Err(Error::DimensionMismatch { context: "block structure", expected: p.len(), found: blocks.num_states() });
    }
    let m = p.matrix();
    let k = blocks.num_blocks();
    let mut mu = Vec::with_capacity(k);
    let mut radii = Vec::with_capacity(k);
    let mut reducible = Vec::new();
    for b in 0..k {
        let pii = blocks.sub_block(m, b, b);
        if !is_irreducible(&pii) {
            reducible.push(b);
        }
        let (rho, v) = perron_left_vector(&pii)?;
        radii.push(rho);
        mu.push(v);
    }
    let mut p_hat = DMatrix::zeros(k, k);
    let mut residual = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let flow = mu[i].row() * blocks.sub_block(m, i, j);
            let mass = flow.sum();
            p_hat[(i, j)] = mass;
            residual = residual.max((flow - mu[j].row() * mass).amax());
        }
    }
    Ok(BlockDual {
        p_hat: StochasticMatrix::from_matrix(p_hat)?,
        mu,
        spectral_radii: radii,
        residual,
        reducible_blocks: reducible,
    })
}

/// The `(k+1) x |X|` link whose row `i` is `mu_i` placed on block `i`.
pub fn block_link(blocks: &BlockStructure, mu: &[ProbabilityVector]) -> Result<QuasiLink> {
    if mu.len() != blocks.num_blocks() {
        return Err(Error::DimensionMismatch { context: "block laws", expected: blocks.num_blocks(), found: mu.len() });
    }
    let mut m = DMatrix::zeros(blocks.num_blocks(), blocks.num_states());
    for (b, law) in mu.iter().enumerate() {
        let members = blocks.members(b);
        if law.len() != members.len() {
            return Err(Error::SupportMismatch { block: b, expected: members.len(), found: law.len() });
        }
        for (&s, &w) in members.iter().zip(law.as_slice()) {
            m[(b, s)] = w;
        }
    }
    QuasiLink::new(m)
}

/// `sum_i pi^0(i) mu_i`, the primary initial law matching a dual initial law.
pub fn lift_initial(blocks: &BlockStructure, mu: &[ProbabilityVector], dual_init: &ProbabilityVector) -> Result<ProbabilityVector> {
    let link = block_link(blocks, mu)?;
    ProbabilityVector::new((dual_init.row() * link.matrix()).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::conforming_block_chain;
    use crate::intertwining::{certify, Side};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_block() {
        let (rho, mu) = perron_left_vector(&DMatrix::from_element(1, 1, 0.5)).unwrap();
        assert!((rho - 0.5).abs() < 1e-15);
        assert_eq!(mu.as_slice(), &[1.0]);
    }

    #[test]
    fn symmetric_two_by_two() {
        let (rho, mu) = perron_left_vector(&DMatrix::from_row_slice(2, 2, &[0.2, 0.3, 0.3, 0.2])).unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
        assert!((mu[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moran_two_part_block() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0 / 12.0, 8.0 / 12.0, 3.0 / 12.0, 6.0 / 12.0]);
        let (rho, mu) = perron_left_vector(&a).unwrap();
        assert!((rho - 5.0 / 6.0).abs() < 1e-12);
        assert!((mu[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_and_nilpotent_blocks() {
        let (rho, mu) = perron_left_vector(&DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.0])).unwrap();
        assert!((rho - 0.4).abs() < 1e-12);
        assert!((mu[1] - 0.5).abs() < 1e-12);
        let (rho, mu) = perron_left_vector(&DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.0, 0.0])).unwrap();
        assert!(rho.abs() < 1e-12);
        assert_eq!(mu.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn radius_within_row_sum_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = DMatrix::from_fn(4, 4, |_, _| rand::Rng::random_range(&mut rng, 0.0..0.25));
            let (rho, mu) = perron_left_vector(&a).unwrap();
            let sums: Vec<f64> = a.row_iter().map(|r| r.sum()).collect();
            let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = sums.iter().copied().fold(0.0, f64::max);
            assert!(rho >= lo - 1e-12 && rho <= hi + 1e-12);
            assert!((mu.row() * &a - mu.row() * rho).amax() <= 1e-10);
        }
    }

    #[test]
    fn blocks_must_be_contiguous() {
        assert!(BlockStructure::new(vec![0, 2]).is_err());
        let b: BlockStructure = serde_json::from_str(r#"{"block_of":[0,0,1]}"#).unwrap();
        assert_eq!(b.sizes(), vec![2, 1]);
        assert!(serde_json::from_str::<BlockStructure>(r#"{"block_of":[1]}"#).is_err());
    }

    #[test]
    fn single_block_is_trivial() {
        let p = crate::fixtures::two_state();
        let blocks = BlockStructure::from_sizes(&[2]).unwrap();
        let dual = fit_block_dual(&p, &blocks).unwrap();
        assert_eq!(dual.p_hat.len(), 1);
        assert!((dual.p_hat.get(0, 0) - 1.0).abs() < 1e-12);
        // the stationary law is the Perron vector of the whole kernel
        assert!(dual.residual < 1e-12);
        assert!((dual.mu[0][0] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn conforming_chain_certifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (p, blocks, _) = conforming_block_chain(&[3, 2, 4, 1], &mut rng);
            let dual = fit_block_dual(&p, &blocks).unwrap();
            assert!(dual.residual <= 1e-12, "{}", dual.residual);
            for b in 0..4 {
                assert!((dual.p_hat.get(b, b) - dual.spectral_radii[b]).abs() <= 1e-9);
            }
            let link = block_link(&blocks, &dual.mu).unwrap();
            assert!(link.is_stochastic());
            let dual_init = ProbabilityVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
            let init = lift_initial(&blocks, &dual.mu, &dual_init).unwrap();
            let cert = certify(&link, Side::new(&init, &p, 9), Side::new(&dual_init, &dual.p_hat, 3)).unwrap();
            assert!(cert.residual_semigroup <= 1e-12 && cert.residual_initial <= 1e-12);
        }
    }

    #[test]
    fn support_mismatch() {
        let blocks = BlockStructure::from_sizes(&[2, 1]).unwrap();
        let mu = vec![ProbabilityVector::uniform(1), ProbabilityVector::uniform(1)];
        assert!(matches!(block_link(&blocks, &mu), Err(Error::SupportMismatch { block: 0, .. })));
    }
}
