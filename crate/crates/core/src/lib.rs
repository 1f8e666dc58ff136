//! Aggregation of local image descriptors into global retrieval signatures.
//!
//! Descriptors of neighbouring grid cells are coupled into per-cluster-pair
//! outer products, centered and projected on the SVD basis of the training
//! mean, normalized across cluster pairs, and compressed by a two-stage
//! inner-product-preserving reduction. The crate is `no_std` and only needs
//! an allocator; file formats and the command line live in the `ista` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod aggregation;
pub mod codebook;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod normalize;
pub mod oracle;
pub mod reduce;
pub mod retrieval;

pub use aggregation::{PairBasis, PairComponent, PairLayout, PairStatistics, RawSignature};
pub use codebook::Codebook;
pub use error::{Error, Result};
pub use grid::{DescriptorGrid, GridPosition, Resolution};
pub use normalize::NormalizationConfig;
pub use reduce::{BlockProjection, BlockReduced, FullProjection, PairBlocks, Projection};
pub use retrieval::{GroundTruth, PairContributions, Signature};
