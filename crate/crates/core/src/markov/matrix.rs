use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result, Violation};
use crate::tol;

/// Dense row-stochastic matrix with state labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    labels: Vec<String>,
    entries: DMatrix<f64>,
}

/// Checks a raw square matrix and returns it as a [`StochasticMatrix`].
///
/// Entries in `[-1e-9, 0)` are clamped to zero and rows within `1e-9` of unit
/// sum are renormalized. Everything else is reported: all violations are
/// collected, not just the first.
pub fn validate_stochastic(labels: Option<Vec<String>>, rows: &[Vec<f64>]) -> Result<StochasticMatrix> {
    let n = rows.len();
    let mut violations = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            violations.push(Violation::NonSquare { rows: n, row: i, cols: row.len() });
        }
    }
    if !violations.is_empty() || n == 0 {
        if n == 0 {
            violations.push(Violation::NonSquare { rows: 0, row: 0, cols: 0 });
        }
        return Err(Error::InvalidMatrix(violations));
    }
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let mut most_negative = 0.0_f64;
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                violations.push(Violation::NonFinite { row: i, col: j });
                continue;
            }
            most_negative = most_negative.min(v);
            if v < -tol::NEGATIVE_REJECT {
                violations.push(Violation::NegativeEntry { row: i, col: j, value: v });
            }
            entries[(i, j)] = v.max(0.0);
        }
        let sum: f64 = row.iter().filter(|v| v.is_finite()).sum();
        if (sum - 1.0).abs() > tol::ROW_SUM_REJECT {
            violations.push(Violation::RowSumViolation { row: i, sum, most_negative });
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMatrix(violations));
    }
    for i in 0..n {
        let s: f64 = entries.row(i).sum();
        entries.row_mut(i).unscale_mut(s);
    }
    let labels = match labels {
        Some(l) if l.len() == n => l,
        Some(l) => {
            return Err(Error::DimensionMismatch { context: "state labels", expected: n, found: l.len() })
        }
        None => default_labels(n),
    };
    Ok(StochasticMatrix { labels, entries })
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl StochasticMatrix {
    /// Builds a chain labelled `0..n` from rows.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_stochastic(None, &rows)
    }

    pub fn with_labels(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_stochastic(Some(labels), &rows)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        validate_stochastic(None, &rows)
    }

    pub fn from_matrix_labelled(labels: Vec<String>, m: DMatrix<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        validate_stochastic(Some(labels), &rows)
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::BadTarget { target: i, states: self.len() })
        }
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        (self.entries[(i, i)] - 1.0).abs() <= tol::ROW_SUM
    }

    /// The principal submatrix with row and column `deleted` removed.
    pub fn deleted(&self, deleted: usize) -> DMatrix<f64> {
        self.entries.clone().remove_row(deleted).remove_column(deleted)
    }

    /// Reorders states so that new state `k` is old state `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.len();
        assert_eq!(order.len(), n, "permutation length");
        let entries = DMatrix::from_fn(n, n, |i, j| self.entries[(order[i], order[j])]);
        let labels = order.iter().map(|&k| self.labels[k].clone()).collect();
        StochasticMatrix { labels, entries }
    }

    /// Permutation that moves `target` to index 0 and keeps the others in order.
    pub fn target_first_order(&self, target: usize) -> Vec<usize> {
        std::iter::once(target).chain((0..self.len()).filter(|&k| k != target)).collect()
    }

    /// Positive-entry graph reachability from `start`.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        reachable(&self.entries, start)
    }

    pub fn is_irreducible(&self) -> bool {
        is_irreducible(&self.entries)
    }

    /// Period of state 0 from return lengths up to `2n`; 1 means aperiodic.
    pub fn period(&self) -> usize {
        let n = self.len();
        let mut frontier = vec![false; n];
        frontier[0] = true;
        let mut g = 0usize;
        for t in 1..=2 * n {
            let mut next = vec![false; n];
            for i in (0..n).filter(|&i| frontier[i]) {
                for j in 0..n {
                    if self.entries[(i, j)] > 0.0 {
                        next[j] = true;
                    }
                }
            }
            if next[0] {
                g = gcd(g, t);
            }
            frontier = next;
        }
        g
    }

    pub fn is_ergodic(&self) -> bool {
        self.is_irreducible() && self.period() == 1
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.entries.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

impl Serialize for StochasticMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

pub(crate) fn reachable(m: &DMatrix<f64>, start: usize) -> Vec<bool> {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if m[(i, j)] > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Strong connectivity of the positive-entry graph of a square matrix.
pub(crate) fn is_irreducible(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n == 0 {
        return false;
    }
    if !reachable(m, 0).into_iter().all(|b| b) {
        return false;
    }
    reachable(&m.transpose(), 0).into_iter().all(|b| b)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Replaces row `target` by the point mass on `target`.
pub fn make_absorbing(p: &StochasticMatrix, target: usize) -> Result<StochasticMatrix> {
    p.check_index(target)?;
    let mut out = p.clone();
    out.entries.row_mut(target).fill(0.0);
    out.entries[(target, target)] = 1.0;
    Ok(out)
}

/// Nonnegative row vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(RowDVector<f64>);

impl ProbabilityVector {
    /// Accepts a vector within `1e-9` of a distribution and renormalizes it.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite() || **v < -tol::NEGATIVE_REJECT) {
            return Err(Error::InvalidDistribution(format!("entry {bad}")));
        }
        let clamped: Vec<f64> = entries.iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > tol::ROW_SUM_REJECT {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(ProbabilityVector(RowDVector::from_vec(clamped) / sum))
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut v = RowDVector::zeros(n);
        v[i] = 1.0;
        ProbabilityVector(v)
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityVector(RowDVector::from_element(n, 1.0 / n as f64))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn row(&self) -> &RowDVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        ProbabilityVector(RowDVector::from_fn(order.len(), |_, k| self.0[order[k]]))
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Serialize for ProbabilityVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

/// Largest absolute entry.
pub(crate) fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<f64, R, C, S>) -> f64
where
    S: nalgebra::RawStorage<f64, R, C>,
{
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_two_state() {
        let p = StochasticMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.labels(), &["0".to_string(), "1".to_string()]);
    }

    #[test]
    fn rejects_short_row_sum() {
        let err = StochasticMatrix::new(vec![vec![0.5, 0.4], vec![0.2, 0.8]]).unwrap_err();
        match err {
            Error::InvalidMatrix(v) => {
                assert_eq!(v.len(), 1);
                assert!(matches!(v[0], Violation::RowSumViolation { row: 0, .. }));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_non_square_and_negative() {
        let err = StochasticMatrix::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(ref v) if matches!(v[0], Violation::NonSquare { .. })));
        let err = StochasticMatrix::new(vec![vec![1.1, -0.1], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(ref v) if matches!(v[0], Violation::NegativeEntry { .. })));
    }

    #[test]
    fn clamps_tiny_negatives() {
        let p = StochasticMatrix::new(vec![vec![1.0 + 1e-16, -1e-16], vec![0.5, 0.5]]).unwrap();
        assert_eq!(p.get(0, 1), 0.0);
        assert!(p.max_row_sum_error() <= 1e-15);
    }

    #[test]
    fn absorbing_is_idempotent() {
        let p = StochasticMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let a = make_absorbing(&p, 0).unwrap();
        assert_eq!(a.row(0), vec![1.0, 0.0]);
        assert_eq!(a.row(1), p.row(1));
        assert_eq!(make_absorbing(&a, 0).unwrap(), a);
        assert!(matches!(make_absorbing(&p, 2), Err(Error::BadTarget { .. })));
    }

    #[test]
    fn period_and_irreducibility() {
        let cycle = StochasticMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(cycle.is_irreducible());
        assert_eq!(cycle.period(), 2);
        let lazy = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!(lazy.is_ergodic());
        let split = StochasticMatrix::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(!split.is_irreducible());
    }

    #[test]
    fn permutation_moves_target_first() {
        let p = StochasticMatrix::new(vec![vec![0.1, 0.2, 0.7], vec![0.3, 0.3, 0.4], vec![0.5, 0.25, 0.25]]).unwrap();
        let order = p.target_first_order(2);
        assert_eq!(order, vec![2, 0, 1]);
        let q = p.permuted(&order);
        assert_eq!(q.get(0, 0), 0.25);
        assert_eq!(q.get(0, 1), 0.5);
        assert_eq!(q.labels()[0], "2");
    }

    #[test]
    fn probability_vector_checks() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        let v = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(v[1], 0.75);
    }
}
