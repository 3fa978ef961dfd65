//! Cost-sensitive label embedding for multi-label classification.
//!
//! The pipeline embeds a candidate set of label vectors into a Euclidean
//! space so that distances reproduce the (possibly asymmetric) cost of
//! predicting one label vector for another: each candidate is mirrored into
//! a truth-role and a prediction-role copy, the isotonic costs between the
//! roles become a weighted MDS problem solved by stress majorization, a
//! multi-target random forest regresses instances into the space, and
//! predictions decode to the nearest truth-role coordinate.
//!
//! Besides the embedding pipeline the crate ships the evaluation criteria
//! (F1, Accuracy, Hamming loss, Rank loss), PLST and binary-relevance
//! baselines, Mulan ARFF/XML and CSV loaders, model persistence, and a
//! seeded experiment harness; `cli` exposes all of it as subcommands.

pub mod baseline;
pub mod cli;
pub mod cost;
pub mod data;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod io;
pub mod mds;
pub mod model;
mod seeding;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use seeding::derive_seed;
