//! Demand-embedding clustering, stratified cluster-randomized experiment
//! design, and interference-bias estimation for online marketplaces.
//!
//! Marketplace units interfere: a price change on one listing shifts demand
//! onto its close substitutes, so unit-randomized A/B tests overstate total
//! treatment effects. This crate implements the full counter-measure
//! pipeline and a simulator to validate it against known ground truth:
//!
//! - [`embed`]: skip-gram demand embeddings from search co-view sessions,
//!   with market-level negative sampling.
//! - [`cluster`]: recursive 2-means partitioning of embedding space,
//!   threshold-sized cluster extraction, and demand-capture diagnostics.
//! - [`design`]: Mahalanobis-distance stratification into blocks of eight
//!   and the meta-experiment randomization (Bernoulli arm vs
//!   cluster-randomized arm), plus KS balance checks.
//! - [`analyze`]: fixed-effects least squares with cluster-robust
//!   covariance, joint bias decomposition, MDE/power math, and aggregated /
//!   mixed-unit analysis variants.
//! - [`sim`]: a marketplace simulator with tunable buyer-side substitution
//!   and exact ground-truth treatment effects via global counterfactuals.
//! - [`datamodel`]: shared types and file formats.
//!
//! The `metaexp` binary wires these into a small pipeline CLI; the crate's
//! `examples/` directory demonstrates each capability standalone.

pub mod analyze;
pub mod cli;
pub mod cluster;
pub mod datamodel;
pub mod design;
pub mod embed;
pub mod error;
pub mod report;
pub mod seeds;
pub mod sim;

pub use error::{Error, Result};
