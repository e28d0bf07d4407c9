//! Chain files and the collapse preprocessor.

use std::path::Path;

use hitlace::markov::{stationary_distribution, ProbabilityVector, StochasticMatrix};
use hitlace::{Error, Result};
use serde::{Deserialize, Serialize};

/// On-disk chain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainInput {
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default)]
    pub pi0: Option<Vec<f64>>,
    #[serde(default)]
    pub target: Option<String>,
}

/// A validated chain with its optional initial law and target label.
#[derive(Debug, Clone)]
pub struct Chain {
    pub p: StochasticMatrix,
    pub pi0: Option<ProbabilityVector>,
    pub target: Option<String>,
}

impl ChainInput {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn read(path: &Path) -> std::result::Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(self) -> Result<Chain> {
        let p = match self.labels {
            Some(labels) => StochasticMatrix::with_labels(labels, self.p)?,
            None => StochasticMatrix::new(self.p)?,
        };
        let pi0 = self.pi0.map(ProbabilityVector::new).transpose()?;
        if let Some(v) = &pi0 {
            if v.len() != p.len() {
                return Err(Error::DimensionMismatch { context: "initial law", expected: p.len(), found: v.len() });
            }
        }
        Ok(Chain { p, pi0, target: self.target })
    }
}

/// Resolves a state by label, falling back to a numeric index.
pub fn resolve_state(p: &StochasticMatrix, key: &str) -> Result<usize> {
    p.index_of(key).or_else(|e| match key.parse::<usize>() {
        Ok(i) if i < p.len() => Ok(i),
        _ => Err(e),
    })
}

/// Merges `subset` into one state labelled `label`, placed at the position of
/// the subset's first member.
///
/// The merged row is the `pi0`-weighted mixture of the member rows (uniform
/// when `pi0` puts no mass on the subset); every row has its subset columns
/// summed. Returns the merged chain and the merged initial law.
pub fn collapse_states(
    p: &StochasticMatrix,
    pi0: &ProbabilityVector,
    subset: &[usize],
    label: &str,
) -> Result<(StochasticMatrix, ProbabilityVector)> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = p.len();
    let mut inside = vec![false; n];
    for &s in subset {
        if s >= n {
            return Err(Error::BadTarget { target: s, states: n });
        }
        inside[s] = true;
    }
    let first = (0..n).find(|&s| inside[s]).unwrap();
    // class[j] = index of state j in the merged chain
    let mut class = vec![0; n];
    let mut labels = Vec::new();
    for j in 0..n {
        if inside[j] && j != first {
            class[j] = class[first];
            continue;
        }
        class[j] = labels.len();
        labels.push(if j == first { label.to_string() } else { p.labels()[j].clone() });
    }
    let m = labels.len();
    let members: Vec<usize> = (0..n).filter(|&s| inside[s]).collect();
    let mass: f64 = members.iter().map(|&s| pi0[s]).sum();
    let weight = |s: usize| if mass > 0.0 { pi0[s] / mass } else { 1.0 / members.len() as f64 };
    let mut rows = vec![vec![0.0; m]; m];
    let mut init = vec![0.0; m];
    for i in 0..n {
        let w = if inside[i] { weight(i) } else { 1.0 };
        init[class[i]] += pi0[i];
        for j in 0..n {
            rows[class[i]][class[j]] += w * p.get(i, j);
        }
    }
    Ok((StochasticMatrix::with_labels(labels, rows)?, ProbabilityVector::new(init)?))
}

impl Chain {
    /// Initial law for weighting merged rows: `pi0` if given, else stationary.
    pub fn weighting_law(&self) -> Result<ProbabilityVector> {
        match &self.pi0 {
            Some(v) => Ok(v.clone()),
            None => stationary_distribution(&self.p),
        }
    }

    /// Applies [`collapse_states`] with the given labels; the merged state takes
    /// the target label when the target is in the subset, else the joined labels.
    pub fn collapse(self, subset: &[String], target: Option<&str>) -> Result<Chain> {
        let idx: Vec<usize> = subset.iter().map(|s| resolve_state(&self.p, s)).collect::<Result<_>>()?;
        let label = match target {
            Some(t) if subset.iter().any(|s| s == t) => t.to_string(),
            _ => subset.join("+"),
        };
        let law = self.weighting_law()?;
        let (p, merged) = collapse_states(&self.p, &law, &idx, &label)?;
        let pi0 = self.pi0.is_some().then_some(merged);
        let target = if target.is_some_and(|t| subset.iter().any(|s| s == t)) {
            Some(label)
        } else {
            self.target
        };
        Ok(Chain { p, pi0, target })
    }
}
