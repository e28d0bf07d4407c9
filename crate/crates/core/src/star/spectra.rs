use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{Spectrum, StochasticMatrix};

/// Survivors of cancelling `sigma(P) ∩ sigma(P_0)`, strictly interlacing
/// `1 = lambda_0 > gamma_1 > lambda_1 > ... > gamma_r > lambda_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSpectra {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// For each `gamma_i`, every index of `eta` lying within the matching
    /// tolerance of it, whether or not it was cancelled.
    pub multiplicity_map: Vec<Vec<usize>>,
    pub shift_applied: Option<f64>,
}

impl ReducedSpectra {
    /// Builds and validates reduced spectra directly.
    pub fn new(lambdas: Vec<f64>, gammas: Vec<f64>, eps: f64) -> Result<Self> {
        let multiplicity_map = (0..gammas.len()).map(|i| vec![i]).collect();
        let out = ReducedSpectra { lambdas, gammas, multiplicity_map, shift_applied: None };
        out.check_interlacing(eps)?;
        Ok(out)
    }

    /// `r`, the number of spokes.
    pub fn r(&self) -> usize {
        self.gammas.len()
    }

    /// `rho_i = (1 - gamma_i) / (1 - lambda_i)`, for `i = 1..=r`.
    pub fn rho(&self) -> Vec<f64> {
        self.gammas.iter().zip(&self.lambdas[1..]).map(|(g, l)| (1.0 - g) / (1.0 - l)).collect()
    }

    /// Sizes `n_i` of the eigenvalue groups of `P_0` collapsing onto each `gamma_i`.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.multiplicity_map.iter().map(Vec::len).collect()
    }

    pub fn check_interlacing(&self, eps: f64) -> Result<()> {
        if self.lambdas.len() != self.gammas.len() + 1 {
            return Err(Error::InterlacingViolated {
                upper: self.lambdas.len() as f64,
                lower: self.gammas.len() as f64,
            });
        }
        let mut seq = Vec::with_capacity(2 * self.gammas.len() + 1);
        for (l, g) in self.lambdas.iter().zip(&self.gammas) {
            seq.push(*l);
            seq.push(*g);
        }
        seq.push(*self.lambdas.last().unwrap());
        for w in seq.windows(2) {
            if w[0] - w[1] <= eps {
                return Err(Error::InterlacingViolated { upper: w[0], lower: w[1] });
            }
        }
        let last = *seq.last().unwrap();
        if last < -1.0 - eps {
            return Err(Error::InterlacingViolated { upper: last, lower: -1.0 });
        }
        Ok(())
    }
}

fn close(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * b.abs().max(1.0)
}

/// Cancels common eigenvalues of `P` (`theta`) and `P_0` (`eta`) by a greedy
/// walk over both descending lists; survivors become `lambda` and `gamma`.
pub fn reduce_spectra(theta: &Spectrum, eta: &Spectrum, eps: f64) -> Result<ReducedSpectra> {
    let (th, et) = (&theta.eigenvalues, &eta.eigenvalues);
    let mut lambdas = Vec::new();
    let mut gammas = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < th.len() || j < et.len() {
        match (th.get(i), et.get(j)) {
            (Some(&t), Some(&e)) if close(e, t, eps) => {
                if let Some(&t2) = th.get(i + 1) {
                    if close(e, t2, eps) && (t - t2).abs() > eps {
                        return Err(Error::AmbiguousMatching { value: e });
                    }
                }
                i += 1;
                j += 1;
            }
            (Some(&t), Some(&e)) if t > e => {
                lambdas.push(t);
                i += 1;
            }
            (_, Some(&e)) => {
                gammas.push(e);
                j += 1;
            }
            (Some(&t), None) => {
                lambdas.push(t);
                i += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    for w in gammas.windows(2) {
        if close(w[1], w[0], eps) {
            return Err(Error::AmbiguousMatching { value: w[1] });
        }
    }
    let multiplicity_map =
        gammas.iter().map(|&g| (0..et.len()).filter(|&k| close(et[k], g, eps)).collect()).collect();
    let out = ReducedSpectra { lambdas, gammas, multiplicity_map, shift_applied: None };
    out.check_interlacing(eps)?;
    Ok(out)
}

/// `(P + cI) / (1 + c)`: eigenvalues map to `(theta + c) / (1 + c)`, the
/// stationary law is unchanged.
pub fn shift_chain(p: &StochasticMatrix, c: f64) -> Result<StochasticMatrix> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidWeights(format!("shift {c} must be a nonnegative number")));
    }
    let n = p.len();
    let m = (p.matrix() + DMatrix::identity(n, n) * c) / (1.0 + c);
    StochasticMatrix::from_matrix_labelled(p.labels().to_vec(), m)
}

/// Shift used when `lambda_r < 0`: `c = -lambda_r + 0.05`, giving
/// `lambda_r' = 0.05 / (1 + c)`, which exceeds 0.024 for any `lambda_r > -1`
/// and 0.04 once `lambda_r >= -0.2`.
pub fn auto_shift(lambda_r: f64) -> Option<f64> {
    (lambda_r < 0.0).then(|| -lambda_r + 0.05)
}
