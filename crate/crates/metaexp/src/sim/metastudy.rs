//! Monte-Carlo replication harness: world -> clusters -> design ->
//! outcomes -> arm estimates, compared against exact ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::outcomes::{ground_truth, simulate_outcomes, simulate_with_sessions, TreatmentRegime};
use super::world::generate_world;
use super::SimConfig;
use crate::analyze::{
    normal_cdf, ols_fit, FitOptions, OutcomeKind, RegressionCovariates, RegressionData, SeMode,
    SpecKind,
};
use crate::cluster::{assign_clusters, build_partition_tree, build_partition_tree_points};
use crate::datamodel::MetaArm;
use crate::design::{
    assign_design, build_strata, compute_cluster_covariates, mahalanobis_matrix, CovariateSet,
    DesignParams,
};
use crate::embed::{train_embeddings, EmbedConfig};
use crate::error::{Error, Result};
use crate::seeds;

/// Full meta-study configuration: the simulator, the clustering/design
/// pipeline, and the replication count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sim: SimConfig,
    /// Cluster listings on trained embeddings (full pipeline) instead of
    /// their true latent positions.
    pub use_embeddings: bool,
    pub embed: EmbedConfigSnapshot,
    pub cluster_threshold: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub stratum_size: usize,
    pub bernoulli_clusters_per_stratum: usize,
    pub treated_share: f64,
    pub outcome: OutcomeKind,
    pub n_replications: usize,
    pub master_seed: u64,
}

/// Serializable mirror of the embedding hyperparameters (the per-run seed
/// is derived from the replication seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfigSnapshot {
    pub dim: usize,
    pub window_k: usize,
    pub negatives_m: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
}

impl Default for EmbedConfigSnapshot {
    fn default() -> Self {
        let d = EmbedConfig::default();
        EmbedConfigSnapshot {
            dim: d.dim,
            window_k: d.window_k,
            negatives_m: d.negatives_m,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            min_count: d.min_count,
        }
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            sim: SimConfig::default(),
            use_embeddings: false,
            embed: EmbedConfigSnapshot::default(),
            cluster_threshold: 250,
            tree_max_depth: 20,
            tree_min_leaf: 20,
            stratum_size: 8,
            bernoulli_clusters_per_stratum: 2,
            treated_share: 0.5,
            outcome: OutcomeKind::Bookings,
            n_replications: 200,
            master_seed: 0,
        }
    }
}

/// One replication's estimates and realized biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub bernoulli_estimate: f64,
    pub cluster_estimate: f64,
    pub ground_truth: f64,
    pub bias_bernoulli: f64,
    pub bias_cluster: f64,
    pub n_clusters: usize,
    pub n_strata: usize,
    pub n_excluded_clusters: usize,
}

/// Monte-Carlo summary over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub n_replications: usize,
    pub mean_ground_truth: f64,
    pub mean_bias_bernoulli: f64,
    pub mean_bias_cluster: f64,
    /// Monte-Carlo standard errors of the mean biases.
    pub se_bias_bernoulli: f64,
    pub se_bias_cluster: f64,
    pub mean_abs_bias_bernoulli: f64,
    pub mean_abs_bias_cluster: f64,
    /// Paired one-sided test of |bias_bernoulli| > |bias_cluster|.
    pub paired_t: f64,
    pub paired_p_one_sided: f64,
}

/// Runs one replication end to end.
pub fn run_replication(study: &StudyConfig, replication: usize) -> Result<ReplicationRecord> {
    let seed = seeds::derive(study.master_seed, "replication", replication as u64);
    let sim_config = SimConfig { seed, ..study.sim.clone() };
    let world = generate_world(&sim_config)?;

    // Pre-treatment window: fresh guest stream, nobody treated. Feeds both
    // the design covariates and (in embedding mode) the training sessions.
    let pre_world = world.pre_period_variant();
    let (pre_panel, sessions) = if study.use_embeddings {
        simulate_with_sessions(&pre_world, TreatmentRegime::AllControl)?
    } else {
        (simulate_outcomes(&pre_world, TreatmentRegime::AllControl)?, Vec::new())
    };

    let listings_all = world.to_listing_records(&pre_panel, |_| true);
    let tree = if study.use_embeddings {
        let embed_config = EmbedConfig {
            dim: study.embed.dim,
            window_k: study.embed.window_k,
            negatives_m: study.embed.negatives_m,
            epochs: study.embed.epochs,
            learning_rate: study.embed.learning_rate,
            min_count: study.embed.min_count,
            seed: seeds::derive(seed, "embed", 0),
        };
        let (matrix, _) = train_embeddings(&sessions, &listings_all, &embed_config, 1)?;
        build_partition_tree(
            &matrix,
            study.tree_max_depth,
            study.tree_min_leaf,
            seeds::derive(seed, "tree", 0),
        )?
    } else {
        build_partition_tree_points(
            world.listing_ids.clone(),
            world.latents.clone(),
            study.tree_max_depth,
            study.tree_min_leaf,
            seeds::derive(seed, "tree", 0),
        )?
    };
    let clusters = assign_clusters(&tree, study.cluster_threshold)?;

    // Listings that never made it into a cluster (possible in embedding
    // mode when a listing was never viewed) sit out the experiment.
    let listings =
        world.to_listing_records(&pre_panel, |id| clusters.cluster_of(id).is_some());

    let covariates = compute_cluster_covariates(&listings, &clusters, CovariateSet::Fee)?;
    let distances = mahalanobis_matrix(&covariates)?;
    let strata = build_strata(&distances, study.stratum_size)?;
    let assignment = assign_design(
        &strata,
        &clusters,
        seeds::derive(seed, "assign", 0),
        DesignParams {
            bernoulli_clusters_per_stratum: study.bernoulli_clusters_per_stratum,
            treated_share: study.treated_share,
        },
    )?;

    let outcomes = simulate_outcomes(&world, TreatmentRegime::AsAssigned(&assignment))?;

    let bern_data = RegressionData::from_experiment(
        &outcomes,
        &assignment,
        &listings,
        study.outcome,
        RegressionCovariates::BookingsNightsValue,
        Some(MetaArm::Bernoulli),
    )?;
    let bern_fit = ols_fit(
        &bern_data,
        FitOptions { kind: SpecKind::ArmLevel, se: SeMode::Robust, ..FitOptions::default() },
    )?;

    let cluster_data = RegressionData::from_experiment(
        &outcomes,
        &assignment,
        &listings,
        study.outcome,
        RegressionCovariates::BookingsNightsValue,
        Some(MetaArm::ClusterRandomized),
    )?;
    let cluster_fit = ols_fit(
        &cluster_data,
        FitOptions { kind: SpecKind::ArmLevel, se: SeMode::Clustered, ..FitOptions::default() },
    )?;

    let gt = ground_truth(&world)?.tate(study.outcome);
    let bernoulli_estimate = bern_fit
        .coefficient("treatment")
        .ok_or_else(|| Error::Domain("missing treatment coefficient".into()))?;
    let cluster_estimate = cluster_fit
        .coefficient("treatment")
        .ok_or_else(|| Error::Domain("missing treatment coefficient".into()))?;

    Ok(ReplicationRecord {
        replication,
        seed,
        bernoulli_estimate,
        cluster_estimate,
        ground_truth: gt,
        bias_bernoulli: bernoulli_estimate - gt,
        bias_cluster: cluster_estimate - gt,
        n_clusters: clusters.n_clusters(),
        n_strata: strata.n_strata(),
        n_excluded_clusters: strata.excluded.len(),
    })
}

/// Runs the full study. Replications are independent (each derives its own
/// seed), so results do not depend on `workers`.
pub fn run_meta_study(
    study: &StudyConfig,
    workers: usize,
) -> Result<(Vec<ReplicationRecord>, StudySummary)> {
    if study.n_replications < 1 {
        return Err(Error::Domain("n_replications must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let records: Result<Vec<ReplicationRecord>> = pool.install(|| {
        (0..study.n_replications)
            .into_par_iter()
            .map(|i| run_replication(study, i))
            .collect()
    });
    let records = records?;
    let summary = summarize(&records);
    Ok((records, summary))
}

/// Builds the Monte-Carlo summary from per-replication records.
pub fn summarize(records: &[ReplicationRecord]) -> StudySummary {
    let n = records.len();
    let nf = n as f64;
    let mean = |f: &dyn Fn(&ReplicationRecord) -> f64| {
        records.iter().map(f).sum::<f64>() / nf
    };
    let mean_bias_bern = mean(&|r| r.bias_bernoulli);
    let mean_bias_clus = mean(&|r| r.bias_cluster);
    let sd = |f: &dyn Fn(&ReplicationRecord) -> f64, m: f64| {
        if n < 2 {
            return f64::NAN;
        }
        (records.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    };

    let diffs: Vec<f64> =
        records.iter().map(|r| r.bias_bernoulli.abs() - r.bias_cluster.abs()).collect();
    let mean_diff = diffs.iter().sum::<f64>() / nf;
    let sd_diff = if n < 2 {
        f64::NAN
    } else {
        (diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    };
    let paired_t = mean_diff / (sd_diff / nf.sqrt());
    let paired_p_one_sided = 1.0 - normal_cdf(paired_t);

    StudySummary {
        n_replications: n,
        mean_ground_truth: mean(&|r| r.ground_truth),
        mean_bias_bernoulli: mean_bias_bern,
        mean_bias_cluster: mean_bias_clus,
        se_bias_bernoulli: sd(&|r| r.bias_bernoulli, mean_bias_bern) / nf.sqrt(),
        se_bias_cluster: sd(&|r| r.bias_cluster, mean_bias_clus) / nf.sqrt(),
        mean_abs_bias_bernoulli: mean(&|r| r.bias_bernoulli.abs()),
        mean_abs_bias_cluster: mean(&|r| r.bias_cluster.abs()),
        paired_t,
        paired_p_one_sided,
    }
}
