//! Reference-free machine translation evaluation: token log-probability
//! aggregation, reference-based baselines, and the meta-evaluation
//! statistics used to compare metrics against human judgments.

pub mod data;
pub mod error;
pub mod ibm1;
pub mod meta;
pub mod ngram;
pub mod scoring;
pub mod stats;
pub mod subword;
pub mod synthetic;

pub use error::{Error, Result};
