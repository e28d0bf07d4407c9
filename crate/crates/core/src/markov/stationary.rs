use nalgebra::{DMatrix, DVector};

use super::matrix::{ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};
use crate::tol;

/// Unique stationary law of an irreducible chain.
///
/// Solves `(P^T - I) pi^T = 0` with the last equation replaced by the
/// normalization row, followed by one step of iterative refinement.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<ProbabilityVector> {
    if !p.is_irreducible() {
        return Err(Error::Reducible);
    }
    let n = p.len();
    let mut a = p.matrix().transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::Reducible)?;
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| *v <= 0.0) {
        // irreducible chains have strictly positive stationary mass
        if let Some(i) = x.iter().position(|v| *v < -tol::NEGATIVE_REJECT) {
            return Err(Error::ZeroStationaryMass { state: i });
        }
    }
    let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clamped.iter().sum();
    ProbabilityVector::new(clamped.into_iter().map(|v| v / s).collect())
}

/// Outcome of a detailed-balance check.
#[derive(Debug, Clone)]
pub struct ReversibilityCheck {
    pub reversible: bool,
    /// `max |pi(i) P(i,j) - pi(j) P(j,i)|`.
    pub residual: f64,
    /// Time reversal `P~(i,j) = pi(j) P(j,i) / pi(i)`.
    pub reversed: StochasticMatrix,
}

pub fn check_reversible(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<ReversibilityCheck> {
    let n = p.len();
    if pi.len() != n {
        return Err(Error::DimensionMismatch { context: "stationary law", expected: n, found: pi.len() });
    }
    if let Some(state) = (0..n).find(|&i| pi[i] <= 0.0) {
        return Err(Error::ZeroStationaryMass { state });
    }
    let m = p.matrix();
    let mut residual = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            residual = residual.max((pi[i] * m[(i, j)] - pi[j] * m[(j, i)]).abs());
        }
    }
    let reversed = DMatrix::from_fn(n, n, |i, j| pi[j] * m[(j, i)] / pi[i]);
    let reversed = StochasticMatrix::from_matrix_labelled(p.labels().to_vec(), reversed)?;
    Ok(ReversibilityCheck { reversible: residual <= tol::DETAILED_BALANCE, residual, reversed })
}
