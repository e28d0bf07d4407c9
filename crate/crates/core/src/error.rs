use thiserror::Error;

/// One defect found while ingesting a raw transition matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonSquare { rows: usize, row: usize, cols: usize },
    NonFinite { row: usize, col: usize },
    RowSumViolation { row: usize, sum: f64, most_negative: f64 },
    NegativeEntry { row: usize, col: usize, value: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonSquare { rows, row, cols } => {
                write!(f, "row {row} has {cols} entries but the matrix has {rows} rows")
            }
            Violation::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
            Violation::RowSumViolation { row, sum, most_negative } => write!(
                f,
                "row {row} sums to {sum} (most negative entry {most_negative})"
            ),
            Violation::NegativeEntry { row, col, value } => {
                write!(f, "entry ({row}, {col}) is negative: {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid transition matrix: {}", join(.0))]
    InvalidMatrix(Vec<Violation>),
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("chain is reducible; no unique stationary distribution")]
    Reducible,
    #[error("stationary mass of state {state} is zero")]
    ZeroStationaryMass { state: usize },
    #[error("chain is not reversible (detailed-balance residual {residual:e})")]
    NotReversible { residual: f64 },
    #[error("symmetrized kernel is not symmetric (residual {residual:e})")]
    SymmetrizationFailure { residual: f64 },
    #[error("state index {target} is out of range for {states} states")]
    BadTarget { target: usize, states: usize },
    #[error("unknown state label {0:?}")]
    UnknownLabel(String),
    #[error("target state {target} is not absorbing")]
    TargetNotAbsorbing { target: usize },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("intertwining residual {residual:e} exceeds {tolerance:e}")]
    CertificateFailed { residual: f64, tolerance: f64 },
    #[error("link is not stochastic; sample-path linking is impossible")]
    NotStochasticLink,
    #[error("linking denominator vanished at step {step} (dual state {dual_state}, primary state {primary_state})")]
    ZeroDenominator {
        step: usize,
        dual_state: usize,
        primary_state: usize,
    },
    #[error("linking weights at step {step} sum to {sum}")]
    LinkWeightSum { step: usize, sum: f64 },
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("block {block}: vector has length {found}, block has {expected} states")]
    SupportMismatch {
        block: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid block structure: {0}")]
    InvalidBlocks(String),
    #[error("n = {n} is outside the supported range {min}..={max}")]
    OutOfRange { n: usize, min: usize, max: usize },
    #[error("spectra do not interlace strictly between {upper} and {lower}")]
    InterlacingViolated { upper: f64, lower: f64 },
    #[error("eigenvalue {value} of the deleted kernel matches more than one candidate")]
    AmbiguousMatching { value: f64 },
    #[error("prefix law {k} has non-positive mass {value:e} at state {state}")]
    NonPositiveMass { k: usize, state: usize, value: f64 },
    #[error("cancelled eigenvalue {eigenvalue} carries coefficient {alpha:e}")]
    UnmatchedMass { eigenvalue: f64, alpha: f64 },
    #[error("matrix is not star shaped: entry ({row}, {col}) is {value}")]
    NotStarShaped { row: usize, col: usize, value: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("P^t(0,0) is not nonincreasing: first violation at t = {t}")]
    MonotonicityViolated { t: usize },
    #[error("P^{index}(0,0) equals pi(0); the ladder terminates")]
    DegenerateDenominator { index: usize },
    #[error("V tail is not a valid tail function at t = {t}")]
    InvalidTail { t: usize },
    #[error("collapse subset is empty")]
    EmptySubset,
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
