//! Pipeline orchestration: configuration, subcommand implementations and
//! exit-code policy.
//!
//! Grammar: `metaexp <cmd> --config <path> [--seed N] [--workers N]
//! [--out DIR]`. Exit codes: 0 success, 2 validation failure, 64 usage
//! error, 74 I/O error. Validation failures print one machine-readable
//! JSON line to stderr.

mod commands;
mod config;

pub use commands::{
    cmd_analyze, cmd_cluster, cmd_design, cmd_embed, cmd_metastudy, cmd_report, cmd_simulate,
    CmdContext,
};
pub use config::{PipelineConfig, RegimeKey};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

/// Maps an error to the documented exit code.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// One-line machine-readable error for stderr.
pub fn error_line(error: &Error) -> String {
    let kind = match error {
        Error::Io { .. } => "io",
        Error::Schema { .. } => "schema",
        Error::UnknownListing(_) => "unknown_listing",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::EmptyCorpus => "empty_corpus",
        Error::EmptyPopulation => "empty_population",
        Error::EmptyCluster(_) => "empty_cluster",
        Error::EmptyGroup(_) => "empty_group",
        Error::TooFewClusters { .. } => "too_few_clusters",
        Error::RankDeficient(_) => "rank_deficient",
        Error::TooFewSeClusters(_) => "too_few_se_clusters",
        Error::DegenerateDenominator => "degenerate_denominator",
        Error::Domain(_) => "domain",
        Error::EmptySample => "empty_sample",
        Error::MissingIndex(_) => "missing_index",
        Error::MissingArtifact(_) => "missing_artifact",
        Error::Config(_) => "config",
    };
    serde_json::json!({ "error": kind, "message": error.to_string() }).to_string()
}
