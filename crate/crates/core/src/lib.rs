//! Hitting times of reversible chains through intertwinings: interlacing
//! star decompositions, block chains, the Moran partition chain and
//! compound-geometric ladders.

pub mod block;
pub mod brown;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod intertwining;
pub mod markov;
pub mod moran;
pub mod star;
pub mod tol;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/intertwinings.md")]
    mod intertwinings {}
    #[doc = include_str!("../../../book/src/block-chains.md")]
    mod block_chains {}
    #[doc = include_str!("../../../book/src/moran.md")]
    mod moran {}
    #[doc = include_str!("../../../book/src/star.md")]
    mod star {}
    #[doc = include_str!("../../../book/src/compound-geometric.md")]
    mod compound_geometric {}
}
