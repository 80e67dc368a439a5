//! Graph classification with sparse binary hypervectors and a Coalesced
//! Tsetlin Machine.
//!
//! Graphs are ranked by PageRank ([`graph`]), encoded into one fixed-length
//! sparse hypervector by symbolic message passing ([`encoder`]) over seeded
//! codebooks ([`embeddings`]), classified by a clause bank with per-class
//! weights ([`cotm`]), and predictions are traced back to the most
//! influential node ([`explain`]). [`tu`] reads TUDataset corpora and
//! [`experiment`] runs the seeded train/test protocol.

pub mod artifact;
pub mod cotm;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod graph;
pub mod hv;
pub mod seed;
pub mod tu;

pub use error::{Error, Result};
pub use hv::{Hypervector, VoteVector};
