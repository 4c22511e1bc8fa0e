//! Identification of informative COVID-19 tweets.
//!
//! The pipeline: [`corpus`] loads TSV splits, [`preprocess`] normalizes and
//! encodes tweets against an [`embeddings`] table, [`bigrucnn`] trains and
//! runs the Bi-GRU-CNN classifier, [`ensemble`] combines per-model
//! prediction files by majority vote and [`metrics`] scores the result.
//! [`cli`] wires these into the `infotweet` binary.

pub mod bigrucnn;
pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod preprocess;

pub use corpus::{Label, Tweet};
pub use error::{Error, ErrorCategory, Result};
