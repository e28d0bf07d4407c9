use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{max_abs, ProbabilityVector, StochasticMatrix};
use super::stationary::check_reversible;
use crate::error::{Error, Result};
use crate::tol;

/// Real spectrum of a reversible kernel, computed through its symmetrization.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors of the symmetrized matrix, one per row, in
    /// the order of `eigenvalues`.
    pub eigenvectors: Option<DMatrix<f64>>,
    /// Diagonal of `D^{1/2}` used for the symmetrization.
    pub scaling: Option<Vec<f64>>,
    /// `max |U^T diag(theta) U - S|`.
    pub reconstruction_residual: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectrum without eigenvectors, e.g. for hand-built inputs.
    pub fn from_values(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Spectrum { eigenvalues, eigenvectors: None, scaling: None, reconstruction_residual: 0.0 }
    }
}

/// `D^{1/2} M D^{-1/2}` for a kernel `M` and positive weights `w` on its states.
fn symmetrize(m: &DMatrix<f64>, w: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let root: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let n = m.nrows();
    let s = DMatrix::from_fn(n, n, |i, j| root[i] * m[(i, j)] / root[j]);
    let asym = max_abs(&(&s - s.transpose()));
    if asym > tol::SYMMETRY {
        return Err(Error::SymmetrizationFailure { residual: asym });
    }
    Ok(((&s + s.transpose()) * 0.5, root))
}

/// Eigen-decomposition of a symmetric matrix, sorted descending, eigenvectors as rows.
pub(crate) fn symmetric_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, f64) {
    let n = s.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0), 0.0);
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let rows = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(j, order[i])]);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&values));
    let residual = max_abs(&(rows.transpose() * diag * &rows - s));
    (values, rows, residual)
}

/// Eigenvalues (descending) and orthonormal eigenrows of `S = D^{1/2} P D^{-1/2}`.
pub fn reversible_spectrum(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<Spectrum> {
    let rev = check_reversible(p, pi)?;
    if !rev.reversible {
        return Err(Error::NotReversible { residual: rev.residual });
    }
    let (s, root) = symmetrize(p.matrix(), pi.as_slice())?;
    let (values, rows, residual) = symmetric_eigen(&s);
    Ok(Spectrum { eigenvalues: values, eigenvectors: Some(rows), scaling: Some(root), reconstruction_residual: residual })
}

/// Spectrum of the principal submatrix of `P` with state `deleted` removed,
/// through `S_0 = D_0^{1/2} P_0 D_0^{-1/2}`.
pub fn deleted_spectrum(p: &StochasticMatrix, pi: &ProbabilityVector, deleted: usize) -> Result<Spectrum> {
    p.check_index(deleted)?;
    let rev = check_reversible(p, pi)?;
    if !rev.reversible {
        return Err(Error::NotReversible { residual: rev.residual });
    }
    let sub = p.deleted(deleted);
    let w: Vec<f64> = (0..p.len()).filter(|&k| k != deleted).map(|k| pi[k]).collect();
    let (s, root) = symmetrize(&sub, &w)?;
    let (values, rows, residual) = symmetric_eigen(&s);
    Ok(Spectrum { eigenvalues: values, eigenvectors: Some(rows), scaling: Some(root), reconstruction_residual: residual })
}
