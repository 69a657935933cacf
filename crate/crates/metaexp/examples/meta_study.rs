// Monte-Carlo meta-study: how much interference bias does Bernoulli
// randomization pick up, and how much of it does cluster randomization
// remove?
//
// Each replication simulates a marketplace, clusters its listings, builds
// a stratified meta-experiment, and compares both arms' estimates against
// the exact ground-truth effect from global counterfactuals.
//
// Usage: `cargo run --release --example meta_study -- [replications] [workers]`

use metaexp::sim::{run_meta_study, SimConfig, StudyConfig};

pub fn run(replications: usize, workers: usize) -> metaexp::Result<()> {
    let study = StudyConfig {
        sim: SimConfig {
            n_listings: 2000,
            n_markets: 40,
            latent_dim: 8,
            n_guests: 20_000,
            consideration_k: 10,
            price_sensitivity: 1.5,
            treatment_price_multiplier: 1.3,
            capacity_per_listing: Some(6),
            base_utility: -0.6,
            ..SimConfig::default()
        },
        cluster_threshold: 50,
        n_replications: replications,
        master_seed: 20_240_101,
        ..StudyConfig::default()
    };

    eprintln!(
        "running {replications} replications on {workers} workers \
         ({} listings, {} guests, k={})...",
        study.sim.n_listings, study.sim.n_guests, study.sim.consideration_k
    );
    let start = std::time::Instant::now();
    let (records, summary) = run_meta_study(&study, workers)?;
    eprintln!("done in {:.1?}", start.elapsed());

    println!("replications:        {}", summary.n_replications);
    println!("mean ground truth:   {:+.4} bookings/listing", summary.mean_ground_truth);
    println!(
        "bernoulli arm bias:  {:+.4} (MC se {:.4})",
        summary.mean_bias_bernoulli, summary.se_bias_bernoulli
    );
    println!(
        "cluster arm bias:    {:+.4} (MC se {:.4})",
        summary.mean_bias_cluster, summary.se_bias_cluster
    );
    println!(
        "mean |bias|:         bernoulli {:.4} vs cluster {:.4}",
        summary.mean_abs_bias_bernoulli, summary.mean_abs_bias_cluster
    );
    println!(
        "paired test |bern| > |cluster|: t = {:.2}, one-sided p = {:.2e}",
        summary.paired_t, summary.paired_p_one_sided
    );
    let reduction =
        1.0 - summary.mean_abs_bias_cluster / summary.mean_abs_bias_bernoulli;
    println!("cluster randomization removes {:.0}% of the absolute bias", reduction * 100.0);

    let worst = records
        .iter()
        .max_by(|a, b| a.bias_bernoulli.abs().partial_cmp(&b.bias_bernoulli.abs()).unwrap())
        .expect("at least one replication");
    println!(
        "worst bernoulli replication: estimate {:+.4} vs truth {:+.4} (seed {})",
        worst.bernoulli_estimate, worst.ground_truth, worst.seed
    );
    Ok(())
}

fn main() -> metaexp::Result<()> {
    let mut args = std::env::args().skip(1);
    let replications: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let workers: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    run(replications, workers)
}
