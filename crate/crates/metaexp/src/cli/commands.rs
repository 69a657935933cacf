//! Subcommand implementations. Each reads its inputs, writes artifacts into
//! the output directory, and leaves a resolved-config snapshot beside them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::{PipelineConfig, RegimeKey};
use crate::analyze::{
    cluster_aggregated_fit, joint_bias_decomposition, mixed_unit_fit, ols_fit, power_report,
    FitOptions, RegressionData, RegressionFit, SeMode, SpecKind, DEFAULT_CONFIDENCE,
    DEFAULT_POWER,
};
use crate::cluster::{
    assign_clusters, build_partition_tree, demand_capture_report, load_clusters, save_clusters,
    size_rule_table, CaptureFilters,
};
use crate::datamodel::{
    load_assignment, load_listings, load_outcomes, load_sessions, save_assignment, save_outcomes,
    ListingFormat, MetaArm,
};
use crate::design::{
    assign_design, balance_check, build_strata, compute_cluster_covariates, mahalanobis_matrix,
    BalanceGrouping, DesignParams,
};
use crate::embed::{export_embeddings_text, load_embeddings, save_embeddings, train_embeddings};
use crate::error::{Error, Result};
use crate::report;
use crate::sim::{generate_world, ground_truth, run_meta_study, simulate_outcomes, TreatmentRegime};

/// Shared command context.
pub struct CmdContext {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl CmdContext {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn require(&self, field: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        field
            .clone()
            .ok_or_else(|| Error::Config(format!("config key `{key}` is required for this command")))
    }

    /// Writes the resolved-config snapshot. The timestamp line is the only
    /// non-deterministic content any command emits.
    fn write_snapshot(&self) -> Result<()> {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let body = format!("timestamp={ts}\n{}", self.config.resolved());
        write_text(&self.out("config.resolved"), &body)
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::schema(None, e.to_string()))?;
    write_text(path, &format!("{body}\n"))
}

fn listing_format(path: &Path) -> ListingFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => ListingFormat::Jsonl,
        _ => ListingFormat::Csv,
    }
}

fn ensure_out_dir(ctx: &CmdContext) -> Result<()> {
    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| Error::io(ctx.out_dir.display().to_string(), e))
}

/// `embed`: listings + sessions -> embeddings (binary + text) and a
/// training report.
pub fn cmd_embed(ctx: &CmdContext) -> Result<()> {
    ensure_out_dir(ctx)?;
    let listings_path = ctx.require(&ctx.config.listings, "listings")?;
    let sessions_path = ctx.require(&ctx.config.sessions, "sessions")?;
    let listings = load_listings(&listings_path, listing_format(&listings_path))?;
    let sessions = load_sessions(&sessions_path)?;

    let (matrix, train) =
        train_embeddings(&sessions, &listings, &ctx.config.embed_config(), ctx.workers)?;
    save_embeddings(&matrix, &ctx.out("embeddings.bin"))?;
    export_embeddings_text(&matrix, &ctx.out("embeddings.txt"))?;

    #[derive(Serialize)]
    struct TrainArtifact {
        vocabulary: usize,
        dim: usize,
        epoch_losses: Vec<f64>,
        pairs_per_epoch: u64,
        negative_draws: u64,
        cross_market_draws: u64,
        global_fallback_draws: u64,
        warnings: Vec<String>,
    }
    write_json(
        &ctx.out("embed_report.json"),
        &TrainArtifact {
            vocabulary: matrix.len(),
            dim: matrix.dim,
            epoch_losses: train.epoch_losses,
            pairs_per_epoch: train.pairs_per_epoch,
            negative_draws: train.negative_draws,
            cross_market_draws: train.cross_market_draws,
            global_fallback_draws: train.global_fallback_draws,
            warnings: train.warnings,
        },
    )?;
    ctx.write_snapshot()
}

/// `cluster`: embeddings -> partition tree -> clusters.csv, plus a
/// demand-capture report when sessions are available.
pub fn cmd_cluster(ctx: &CmdContext) -> Result<()> {
    ensure_out_dir(ctx)?;
    let embeddings_path = ctx.require(&ctx.config.embeddings, "embeddings")?;
    let matrix = load_embeddings(&embeddings_path)?;
    let tree = build_partition_tree(
        &matrix,
        ctx.config.cluster_max_depth,
        ctx.config.cluster_min_leaf,
        crate::seeds::derive(ctx.config.seed, "tree", 0),
    )?;
    let clusters = assign_clusters(&tree, ctx.config.cluster_threshold)?;
    save_clusters(&clusters, &ctx.out("clusters.csv"))?;

    #[derive(Serialize)]
    struct TreeSummary {
        listings: usize,
        tree_nodes: usize,
        clusters: usize,
        threshold: usize,
        min_cluster_size: usize,
        max_cluster_size: usize,
    }
    write_json(
        &ctx.out("cluster_summary.json"),
        &TreeSummary {
            listings: matrix.len(),
            tree_nodes: tree.len(),
            clusters: clusters.n_clusters(),
            threshold: clusters.threshold,
            min_cluster_size: clusters.sizes.values().copied().min().unwrap_or(0),
            max_cluster_size: clusters.sizes.values().copied().max().unwrap_or(0),
        },
    )?;

    if let Some(sessions_path) = &ctx.config.sessions {
        let sessions = load_sessions(sessions_path)?;
        let filters = CaptureFilters {
            include_single_view_users: ctx.config.capture_include_single_view_users,
            bookers_only: ctx.config.capture_bookers_only,
        };
        let capture = demand_capture_report(&sessions, &clusters, filters)?;
        write_json(&ctx.out("capture_report.json"), &capture)?;

        if let Some(compare) = ctx.config.cluster_compare_threshold {
            let larger = assign_clusters(&tree, compare)?;
            let table = size_rule_table(&sessions, &clusters, &larger)?;
            write_json(&ctx.out("capture_table.json"), &table)?;
        }
    }
    ctx.write_snapshot()
}

/// `design`: listings + clusters -> covariates -> strata -> assignment,
/// with balance reports for the three standard comparisons.
pub fn cmd_design(ctx: &CmdContext) -> Result<()> {
    ensure_out_dir(ctx)?;
    let listings_path = ctx.require(&ctx.config.listings, "listings")?;
    let clusters_path = ctx.require(&ctx.config.clusters, "clusters")?;
    let listings = load_listings(&listings_path, listing_format(&listings_path))?;
    let clusters = load_clusters(&clusters_path, ctx.config.cluster_threshold)?;

    let covariates =
        compute_cluster_covariates(&listings, &clusters, ctx.config.design_covariates)?;
    let distances = mahalanobis_matrix(&covariates)?;
    let strata = build_strata(&distances, ctx.config.design_stratum_size)?;
    let assignment = assign_design(
        &strata,
        &clusters,
        ctx.config.seed,
        DesignParams {
            bernoulli_clusters_per_stratum: ctx.config.design_bernoulli_clusters,
            treated_share: ctx.config.design_treated_share,
        },
    )?;
    save_assignment(&assignment, &ctx.out("assignment.jsonl"))?;
    write_json(&ctx.out("strata.json"), &strata)?;

    #[derive(Serialize)]
    struct BalanceArtifact {
        meta_arm: crate::design::BalanceReport,
        treatment_within_bernoulli: crate::design::BalanceReport,
        treatment_within_cluster_arm: crate::design::BalanceReport,
    }
    write_json(
        &ctx.out("balance.json"),
        &BalanceArtifact {
            meta_arm: balance_check(&listings, &assignment, BalanceGrouping::MetaArm)?,
            treatment_within_bernoulli: balance_check(
                &listings,
                &assignment,
                BalanceGrouping::TreatmentWithinBernoulli,
            )?,
            treatment_within_cluster_arm: balance_check(
                &listings,
                &assignment,
                BalanceGrouping::TreatmentWithinClusterArm,
            )?,
        },
    )?;
    ctx.write_snapshot()
}

/// `simulate`: generate a world and produce outcomes under the configured
/// regime; optionally also the exact ground-truth counterfactuals.
pub fn cmd_simulate(ctx: &CmdContext) -> Result<()> {
    ensure_out_dir(ctx)?;
    let mut sim_config = ctx.config.sim.clone();
    sim_config.seed = ctx.config.seed;
    let world = generate_world(&sim_config)?;

    let assignment_holder;
    let regime = match ctx.config.sim_regime {
        RegimeKey::AllTreated => TreatmentRegime::AllTreated,
        RegimeKey::AllControl => TreatmentRegime::AllControl,
        RegimeKey::AsAssigned => {
            let path = ctx.require(&ctx.config.assignment, "assignment")?;
            assignment_holder = load_assignment(&path)?;
            TreatmentRegime::AsAssigned(&assignment_holder)
        }
    };
    let panel = simulate_outcomes(&world, regime)?;
    save_outcomes(&panel, &ctx.out("outcomes.csv"))?;

    if ctx.config.sim_emit_ground_truth {
        let gt = ground_truth(&world)?;
        #[derive(Serialize)]
        struct GroundTruthArtifact {
            tate_bookings: f64,
            tate_nights: f64,
            tate_gross_spend: f64,
        }
        write_json(
            &ctx.out("ground_truth.json"),
            &GroundTruthArtifact {
                tate_bookings: gt.tate(crate::analyze::OutcomeKind::Bookings),
                tate_nights: gt.tate(crate::analyze::OutcomeKind::Nights),
                tate_gross_spend: gt.tate(crate::analyze::OutcomeKind::GrossSpend),
            },
        )?;
    }
    ctx.write_snapshot()
}

fn render_fit(ctx: &CmdContext, stem: &str, title: &str, fit: &RegressionFit) -> Result<()> {
    write_json(&ctx.out(&format!("{stem}.json")), fit)?;
    write_text(&ctx.out(&format!("{stem}.txt")), &report::fit_table(fit, title))
}

/// `analyze`: outcomes + assignment + listings -> arm-level fits, the joint
/// fit with the bias decomposition, aggregated/mixed variants, and the MDE
/// table.
pub fn cmd_analyze(ctx: &CmdContext) -> Result<()> {
    ensure_out_dir(ctx)?;
    let listings_path = ctx.require(&ctx.config.listings, "listings")?;
    let assignment_path = ctx.require(&ctx.config.assignment, "assignment")?;
    let outcomes_path = ctx.require(&ctx.config.outcomes, "outcomes")?;
    let listings = load_listings(&listings_path, listing_format(&listings_path))?;
    let assignment = load_assignment(&assignment_path)?;
    let outcomes = load_outcomes(&outcomes_path)?;

    let outcome = ctx.config.analyze_outcome;
    let covariates = ctx.config.analyze_covariates;

    let mut bern_fit = {
        let data = RegressionData::from_experiment(
            &outcomes,
            &assignment,
            &listings,
            outcome,
            covariates,
            Some(MetaArm::Bernoulli),
        )?;
        ols_fit(
            &data,
            FitOptions { kind: SpecKind::ArmLevel, se: SeMode::Robust, ..FitOptions::default() },
        )?
    };
    bern_fit.outcome = outcome.label().to_string();
    render_fit(ctx, "fit_bernoulli", "Bernoulli randomized arm", &bern_fit)?;

    let mut cluster_fit = {
        let data = RegressionData::from_experiment(
            &outcomes,
            &assignment,
            &listings,
            outcome,
            covariates,
            Some(MetaArm::ClusterRandomized),
        )?;
        ols_fit(
            &data,
            FitOptions { kind: SpecKind::ArmLevel, se: SeMode::Clustered, ..FitOptions::default() },
        )?
    };
    cluster_fit.outcome = outcome.label().to_string();
    render_fit(ctx, "fit_cluster", "Cluster randomized arm", &cluster_fit)?;

    let mut joint_fit = {
        let data = RegressionData::from_experiment(
            &outcomes,
            &assignment,
            &listings,
            outcome,
            covariates,
            None,
        )?;
        ols_fit(
            &data,
            FitOptions { kind: SpecKind::Joint, se: SeMode::Clustered, ..FitOptions::default() },
        )?
    };
    joint_fit.outcome = outcome.label().to_string();
    render_fit(ctx, "fit_joint", "Joint meta-analysis", &joint_fit)?;

    let decomposition = joint_bias_decomposition(&joint_fit)?;
    write_json(&ctx.out("bias.json"), &decomposition)?;
    write_text(&ctx.out("bias.txt"), &format!("{}\n", report::bias_line(&decomposition)))?;

    let power = power_report(&joint_fit, DEFAULT_POWER, DEFAULT_CONFIDENCE)?;
    write_json(&ctx.out("power.json"), &power)?;
    write_text(&ctx.out("mde.txt"), &report::mde_table(&power))?;

    let mut agg_fit =
        cluster_aggregated_fit(&outcomes, &assignment, &listings, outcome, covariates)?;
    agg_fit.outcome = outcome.label().to_string();
    render_fit(ctx, "fit_cluster_aggregated", "Cluster-level analysis", &agg_fit)?;

    let mut mixed_fit = mixed_unit_fit(&outcomes, &assignment, &listings, outcome, covariates)?;
    mixed_fit.outcome = outcome.label().to_string();
    render_fit(ctx, "fit_mixed_units", "Mixed-unit analysis", &mixed_fit)?;

    ctx.write_snapshot()
}

/// `metastudy`: run the full Monte-Carlo study and write per-replication
/// records plus the summary.
pub fn cmd_metastudy(ctx: &CmdContext) -> Result<()> {
    ensure_out_dir(ctx)?;
    let study = ctx.config.study_config();
    let (records, summary) = run_meta_study(&study, ctx.workers)?;

    let path = ctx.out("metastudy_runs.jsonl");
    let mut body = String::new();
    for record in &records {
        body.push_str(
            &serde_json::to_string(record).map_err(|e| Error::schema(None, e.to_string()))?,
        );
        body.push('\n');
    }
    write_text(&path, &body)?;
    write_json(&ctx.out("metastudy_summary.json"), &summary)?;
    ctx.write_snapshot()
}

/// `report`: renders the text report from previously written artifacts.
/// Returns the report body (also written to the artifact directory).
pub fn cmd_report(ctx: &CmdContext, artifacts: &Path) -> Result<String> {
    let mut sections: Vec<String> = Vec::new();

    let fit_section = |stem: &str, title: &str| -> Result<Option<String>> {
        let path = artifacts.join(format!("{stem}.json"));
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let fit: RegressionFit =
            serde_json::from_str(&text).map_err(|e| Error::schema(None, e.to_string()))?;
        Ok(Some(report::fit_table(&fit, title)))
    };

    for (stem, title) in [
        ("fit_bernoulli", "Bernoulli randomized arm"),
        ("fit_cluster", "Cluster randomized arm"),
        ("fit_joint", "Joint meta-analysis"),
        ("fit_cluster_aggregated", "Cluster-level analysis"),
        ("fit_mixed_units", "Mixed-unit analysis"),
    ] {
        if let Some(section) = fit_section(stem, title)? {
            sections.push(section);
        }
    }

    let bias_path = artifacts.join("bias.json");
    if bias_path.exists() {
        let text = std::fs::read_to_string(&bias_path)
            .map_err(|e| Error::io(bias_path.display().to_string(), e))?;
        let d: crate::analyze::BiasDecomposition =
            serde_json::from_str(&text).map_err(|e| Error::schema(None, e.to_string()))?;
        sections.push(format!("{}\n", report::bias_line(&d)));
    }

    let power_path = artifacts.join("power.json");
    if power_path.exists() {
        let text = std::fs::read_to_string(&power_path)
            .map_err(|e| Error::io(power_path.display().to_string(), e))?;
        let p: crate::analyze::PowerReport =
            serde_json::from_str(&text).map_err(|e| Error::schema(None, e.to_string()))?;
        sections.push(report::mde_table(&p));
    }

    let capture_path = artifacts.join("capture_table.json");
    if capture_path.exists() {
        let text = std::fs::read_to_string(&capture_path)
            .map_err(|e| Error::io(capture_path.display().to_string(), e))?;
        let t: crate::cluster::SizeRuleTable =
            serde_json::from_str(&text).map_err(|e| Error::schema(None, e.to_string()))?;
        sections.push(report::capture_ratio_table(&t));
    }

    if sections.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "no analysis artifacts found in {}",
            artifacts.display()
        )));
    }
    let body = sections.join("\n");
    ensure_out_dir(ctx)?;
    write_text(&ctx.out("report.txt"), &body)?;
    Ok(body)
}
