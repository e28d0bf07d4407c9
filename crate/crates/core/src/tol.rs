//! Numerical tolerances shared across the crate.
//!
//! Two error sources are kept apart: pure arithmetic on given matrices
//! (`ALGEBRAIC`) and anything that passes through an eigen-decomposition
//! (`SPECTRAL`).

/// Row-sum deviation above which a raw matrix is rejected.
pub const ROW_SUM_REJECT: f64 = 1e-9;
/// Entries below `-NEGATIVE_REJECT` are rejected; entries in between are clamped to zero.
pub const NEGATIVE_REJECT: f64 = 1e-9;
/// Row sums of every stored stochastic matrix.
pub const ROW_SUM: f64 = 1e-12;
/// Residuals of identities that involve only matrix arithmetic.
pub const ALGEBRAIC: f64 = 1e-10;
/// Residuals of identities that involve eigenvectors.
pub const SPECTRAL: f64 = 1e-8;
/// Detailed-balance residual accepted as reversible.
pub const DETAILED_BALANCE: f64 = 1e-10;
/// Allowed asymmetry of `D^{1/2} P D^{-1/2}` before symmetrizing.
pub const SYMMETRY: f64 = 1e-9;
/// Relative tolerance for cancelling eigenvalue pairs.
pub const EPS_MATCH: f64 = 1e-8;
/// Tightest tolerance tried when re-matching after a spurious cancellation.
pub const EPS_MATCH_FLOOR: f64 = 1e-13;
/// Largest coefficient tolerated on a cancelled eigenvalue.
pub const UNMATCHED_ALPHA: f64 = 1e-8;
/// A link entry below `-STOCHASTIC_FLOOR` makes the link non-stochastic.
pub const STOCHASTIC_FLOOR: f64 = 1e-10;
/// Slack for the monotonicity of `P^t(0,0)`.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Relative size at which `P^{i-1}(0,0) - pi(0)` counts as zero and terminates the ladder.
pub const DEGENERATE: f64 = 1e-12;
