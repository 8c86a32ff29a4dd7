//! Topic analysis over precomputed document embeddings: centroid clustering,
//! class-based topic descriptors, a seven-metric evaluation suite, a gated and
//! audited refinement loop, and human-rating statistics.

pub mod agent;
pub mod assessment;
pub mod audit;
pub mod config;
pub mod corpus;
pub mod descriptor;
pub mod embedding;
mod error;
pub mod harness;
pub mod induction;
pub mod matrix;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
