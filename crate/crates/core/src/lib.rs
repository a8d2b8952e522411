//! Embedding-space analytics for word-category learnability.
//!
//! A [`data::LexicalSystem`] holds, for every word, a set of visual and a
//! set of linguistic exemplar embeddings. From it the crate computes
//! within-category variability and between-category discriminability
//! ([`metrics`]), second-order cross-modal alignment against permuted
//! mappings ([`alignment`]), exemplar-aggregation learning curves
//! ([`simulation`]), and a boosted-tree regression of age of acquisition
//! explained with TreeSHAP ([`gbt`], [`regression`]).

pub mod alignment;
pub mod cli;
pub mod data;
pub mod error;
pub mod fmt;
pub mod gbt;
pub mod metrics;
pub mod regression;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
