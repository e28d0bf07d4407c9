//! Stochastic matrices, stationary laws, reversible spectra, exact hitting
//! distributions and path simulation.

mod hitting;
mod matrix;
mod sample;
mod spectral;
mod stationary;

pub use hitting::{
    convolve_truncated, geometric_pmf, hitting_time_cdf, modified_geometric_pmf, unit_mass, HittingCdf,
};
pub(crate) use matrix::{is_irreducible, max_abs};
pub use matrix::{make_absorbing, validate_stochastic, ProbabilityVector, StochasticMatrix};
pub use sample::{sample_path, PathSample, PathSampler};
pub use spectral::{deleted_spectrum, reversible_spectrum, Spectrum};
pub use stationary::{check_reversible, stationary_distribution, ReversibilityCheck};
