//! Flat key=value pipeline configuration.
//!
//! One file drives every subcommand; each command reads its slice of the
//! keys. Unknown keys are rejected so typos fail loudly, and every run
//! writes a resolved snapshot (all keys, defaults filled in) next to its
//! outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analyze::{OutcomeKind, RegressionCovariates};
use crate::cluster::{DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF};
use crate::design::CovariateSet;
use crate::embed::EmbedConfig;
use crate::error::{Error, Result};
use crate::sim::{SimConfig, StudyConfig};

/// Simulation treatment regime for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKey {
    AsAssigned,
    AllTreated,
    AllControl,
}

/// Parsed pipeline configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,

    pub listings: Option<PathBuf>,
    pub sessions: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,

    pub embed_dim: usize,
    pub embed_window: usize,
    pub embed_negatives: usize,
    pub embed_epochs: usize,
    pub embed_learning_rate: f64,
    pub embed_min_count: u64,

    pub cluster_threshold: usize,
    /// When set, `cluster` also cuts at this (larger) threshold and emits
    /// the capture-ratio grid comparing the two clusterings.
    pub cluster_compare_threshold: Option<usize>,
    pub cluster_max_depth: usize,
    pub cluster_min_leaf: usize,

    pub capture_include_single_view_users: bool,
    pub capture_bookers_only: bool,

    pub design_stratum_size: usize,
    pub design_bernoulli_clusters: usize,
    pub design_treated_share: f64,
    pub design_covariates: CovariateSet,

    pub sim: SimConfig,
    pub sim_regime: RegimeKey,
    pub sim_emit_ground_truth: bool,

    pub analyze_outcome: OutcomeKind,
    pub analyze_covariates: RegressionCovariates,

    pub study_replications: usize,
    pub study_use_embeddings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let embed = EmbedConfig::default();
        PipelineConfig {
            seed: 0,
            out: None,
            listings: None,
            sessions: None,
            embeddings: None,
            clusters: None,
            assignment: None,
            outcomes: None,
            embed_dim: embed.dim,
            embed_window: embed.window_k,
            embed_negatives: embed.negatives_m,
            embed_epochs: embed.epochs,
            embed_learning_rate: embed.learning_rate,
            embed_min_count: embed.min_count,
            cluster_threshold: 250,
            cluster_compare_threshold: None,
            cluster_max_depth: DEFAULT_MAX_DEPTH,
            cluster_min_leaf: DEFAULT_MIN_LEAF,
            capture_include_single_view_users: true,
            capture_bookers_only: false,
            design_stratum_size: 8,
            design_bernoulli_clusters: 2,
            design_treated_share: 0.5,
            design_covariates: CovariateSet::Fee,
            sim: SimConfig { seed: 0, ..SimConfig::default() },
            sim_regime: RegimeKey::AsAssigned,
            sim_emit_ground_truth: false,
            analyze_outcome: OutcomeKind::Bookings,
            analyze_covariates: RegressionCovariates::Standard,
            study_replications: 200,
            study_use_embeddings: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for key `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for key `{key}`"))),
    }
}

impl PipelineConfig {
    /// Parses a key=value file. Blank lines and `#` comments are ignored;
    /// unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                )));
            };
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Applies a single key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "listings" => self.listings = Some(PathBuf::from(value)),
            "sessions" => self.sessions = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "clusters" => self.clusters = Some(PathBuf::from(value)),
            "assignment" => self.assignment = Some(PathBuf::from(value)),
            "outcomes" => self.outcomes = Some(PathBuf::from(value)),

            "embed.dim" => self.embed_dim = parse_value(key, value)?,
            "embed.window" => self.embed_window = parse_value(key, value)?,
            "embed.negatives" => self.embed_negatives = parse_value(key, value)?,
            "embed.epochs" => self.embed_epochs = parse_value(key, value)?,
            "embed.learning_rate" => self.embed_learning_rate = parse_value(key, value)?,
            "embed.min_count" => self.embed_min_count = parse_value(key, value)?,

            "cluster.threshold" => self.cluster_threshold = parse_value(key, value)?,
            "cluster.compare_threshold" => {
                self.cluster_compare_threshold = Some(parse_value(key, value)?)
            }
            "cluster.max_depth" => self.cluster_max_depth = parse_value(key, value)?,
            "cluster.min_leaf" => self.cluster_min_leaf = parse_value(key, value)?,

            "capture.include_single_view_users" => {
                self.capture_include_single_view_users = parse_bool(key, value)?
            }
            "capture.bookers_only" => self.capture_bookers_only = parse_bool(key, value)?,

            "design.stratum_size" => self.design_stratum_size = parse_value(key, value)?,
            "design.bernoulli_clusters" => {
                self.design_bernoulli_clusters = parse_value(key, value)?
            }
            "design.treated_share" => self.design_treated_share = parse_value(key, value)?,
            "design.covariates" => {
                self.design_covariates = match value {
                    "fee" => CovariateSet::Fee,
                    "pricing" => CovariateSet::Pricing,
                    _ => return Err(Error::Config(format!("unknown covariate set `{value}`"))),
                }
            }

            "sim.n_listings" => self.sim.n_listings = parse_value(key, value)?,
            "sim.n_markets" => self.sim.n_markets = parse_value(key, value)?,
            "sim.latent_dim" => self.sim.latent_dim = parse_value(key, value)?,
            "sim.n_guests" => self.sim.n_guests = parse_value(key, value)?,
            "sim.consideration_k" => self.sim.consideration_k = parse_value(key, value)?,
            "sim.price_sensitivity" => self.sim.price_sensitivity = parse_value(key, value)?,
            "sim.treatment_price_multiplier" => {
                self.sim.treatment_price_multiplier = parse_value(key, value)?
            }
            "sim.base_price_mu" => self.sim.base_price_mu = parse_value(key, value)?,
            "sim.base_price_sigma" => self.sim.base_price_sigma = parse_value(key, value)?,
            "sim.capacity_per_listing" => {
                self.sim.capacity_per_listing = if value == "unlimited" {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "sim.horizon_days" => self.sim.horizon_days = parse_value(key, value)?,
            "sim.base_utility" => self.sim.base_utility = parse_value(key, value)?,
            "sim.query_noise" => self.sim.query_noise = parse_value(key, value)?,
            "sim.regime" => {
                self.sim_regime = match value {
                    "as_assigned" => RegimeKey::AsAssigned,
                    "all_treated" => RegimeKey::AllTreated,
                    "all_control" => RegimeKey::AllControl,
                    _ => return Err(Error::Config(format!("unknown regime `{value}`"))),
                }
            }
            "sim.emit_ground_truth" => self.sim_emit_ground_truth = parse_bool(key, value)?,

            "analyze.outcome" => {
                self.analyze_outcome = match value {
                    "bookings" => OutcomeKind::Bookings,
                    "nights" => OutcomeKind::Nights,
                    "gross_spend" => OutcomeKind::GrossSpend,
                    _ => return Err(Error::Config(format!("unknown outcome `{value}`"))),
                }
            }
            "analyze.covariates" => {
                self.analyze_covariates = match value {
                    "standard" => RegressionCovariates::Standard,
                    "with_smart_pricing" => RegressionCovariates::WithSmartPricing,
                    "bookings_nights_value" => RegressionCovariates::BookingsNightsValue,
                    "none" => RegressionCovariates::None,
                    _ => {
                        return Err(Error::Config(format!("unknown covariate choice `{value}`")))
                    }
                }
            }

            "study.replications" => self.study_replications = parse_value(key, value)?,
            "study.use_embeddings" => self.study_use_embeddings = parse_bool(key, value)?,

            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            dim: self.embed_dim,
            window_k: self.embed_window,
            negatives_m: self.embed_negatives,
            epochs: self.embed_epochs,
            learning_rate: self.embed_learning_rate,
            seed: crate::seeds::derive(self.seed, "embed", 0),
            min_count: self.embed_min_count,
        }
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            sim: self.sim.clone(),
            use_embeddings: self.study_use_embeddings,
            embed: crate::sim::EmbedConfigSnapshot {
                dim: self.embed_dim,
                window_k: self.embed_window,
                negatives_m: self.embed_negatives,
                epochs: self.embed_epochs,
                learning_rate: self.embed_learning_rate,
                min_count: self.embed_min_count,
            },
            cluster_threshold: self.cluster_threshold,
            tree_max_depth: self.cluster_max_depth,
            tree_min_leaf: self.cluster_min_leaf,
            stratum_size: self.design_stratum_size,
            bernoulli_clusters_per_stratum: self.design_bernoulli_clusters,
            treated_share: self.design_treated_share,
            outcome: self.analyze_outcome,
            n_replications: self.study_replications,
            master_seed: self.seed,
        }
    }

    /// All keys with their resolved values, in file syntax.
    pub fn resolved(&self) -> String {
        let path_or = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("seed", self.seed.to_string());
        kv.insert("out", path_or(&self.out));
        kv.insert("listings", path_or(&self.listings));
        kv.insert("sessions", path_or(&self.sessions));
        kv.insert("embeddings", path_or(&self.embeddings));
        kv.insert("clusters", path_or(&self.clusters));
        kv.insert("assignment", path_or(&self.assignment));
        kv.insert("outcomes", path_or(&self.outcomes));
        kv.insert("embed.dim", self.embed_dim.to_string());
        kv.insert("embed.window", self.embed_window.to_string());
        kv.insert("embed.negatives", self.embed_negatives.to_string());
        kv.insert("embed.epochs", self.embed_epochs.to_string());
        kv.insert("embed.learning_rate", self.embed_learning_rate.to_string());
        kv.insert("embed.min_count", self.embed_min_count.to_string());
        kv.insert("cluster.threshold", self.cluster_threshold.to_string());
        kv.insert(
            "cluster.compare_threshold",
            self.cluster_compare_threshold.map(|t| t.to_string()).unwrap_or_default(),
        );
        kv.insert("cluster.max_depth", self.cluster_max_depth.to_string());
        kv.insert("cluster.min_leaf", self.cluster_min_leaf.to_string());
        kv.insert(
            "capture.include_single_view_users",
            self.capture_include_single_view_users.to_string(),
        );
        kv.insert("capture.bookers_only", self.capture_bookers_only.to_string());
        kv.insert("design.stratum_size", self.design_stratum_size.to_string());
        kv.insert("design.bernoulli_clusters", self.design_bernoulli_clusters.to_string());
        kv.insert("design.treated_share", self.design_treated_share.to_string());
        kv.insert(
            "design.covariates",
            match self.design_covariates {
                CovariateSet::Fee => "fee".to_string(),
                CovariateSet::Pricing => "pricing".to_string(),
            },
        );
        kv.insert("sim.n_listings", self.sim.n_listings.to_string());
        kv.insert("sim.n_markets", self.sim.n_markets.to_string());
        kv.insert("sim.latent_dim", self.sim.latent_dim.to_string());
        kv.insert("sim.n_guests", self.sim.n_guests.to_string());
        kv.insert("sim.consideration_k", self.sim.consideration_k.to_string());
        kv.insert("sim.price_sensitivity", self.sim.price_sensitivity.to_string());
        kv.insert(
            "sim.treatment_price_multiplier",
            self.sim.treatment_price_multiplier.to_string(),
        );
        kv.insert("sim.base_price_mu", self.sim.base_price_mu.to_string());
        kv.insert("sim.base_price_sigma", self.sim.base_price_sigma.to_string());
        kv.insert(
            "sim.capacity_per_listing",
            self.sim
                .capacity_per_listing
                .map(|c| c.to_string())
                .unwrap_or_else(|| "unlimited".to_string()),
        );
        kv.insert("sim.horizon_days", self.sim.horizon_days.to_string());
        kv.insert("sim.base_utility", self.sim.base_utility.to_string());
        kv.insert("sim.query_noise", self.sim.query_noise.to_string());
        kv.insert(
            "sim.regime",
            match self.sim_regime {
                RegimeKey::AsAssigned => "as_assigned",
                RegimeKey::AllTreated => "all_treated",
                RegimeKey::AllControl => "all_control",
            }
            .to_string(),
        );
        kv.insert("sim.emit_ground_truth", self.sim_emit_ground_truth.to_string());
        kv.insert("analyze.outcome", self.analyze_outcome.label().to_string());
        kv.insert(
            "analyze.covariates",
            match self.analyze_covariates {
                RegressionCovariates::Standard => "standard",
                RegressionCovariates::WithSmartPricing => "with_smart_pricing",
                RegressionCovariates::BookingsNightsValue => "bookings_nights_value",
                RegressionCovariates::None => "none",
            }
            .to_string(),
        );
        kv.insert("study.replications", self.study_replications.to_string());
        kv.insert("study.use_embeddings", self.study_use_embeddings.to_string());

        let mut out = String::new();
        for (k, v) in kv {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
