//! Decomposition of the stationary hitting time of a reversible chain into
//! independent modified geometric laws, through a star chain, a pure-descent
//! dual and the links between them.

mod chain;
mod dual;
mod links;
mod pipeline;
mod spectra;

pub use chain::{
    build_star_chain, collapse_star, collapse_star_exact, make_block_star_chain, prefix_law, spoke_distribution,
    spoke_residuals, BlockStarChain, CollapsedStar, StarChain,
};
pub use dual::{
    build_dual_chain, dual_prefix_law, modified_geometric_sum_cdf, modified_geometrics, stationary_mean, DualChain,
    ModifiedGeometric,
};
pub use links::{
    big_link, build_lambda1, build_lambda2, stationary_tail_check, transform_identity_check, Lambda1Workspace,
    TransformPoint, TRANSFORM_POINTS,
};
pub use pipeline::{decompose, CdfTable, Decomposition, DecomposeOptions, Diagnostics};
pub use spectra::{auto_shift, reduce_spectra, shift_chain, ReducedSpectra};
