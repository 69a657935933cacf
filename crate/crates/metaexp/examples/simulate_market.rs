// One simulated meta-experiment, end to end, against exact ground truth.
//
// Generates a marketplace, runs the clustering/stratification/assignment
// pipeline on it, simulates outcomes under the assignment, and compares
// both arms' estimates to the true effect computed from global
// counterfactuals with common random numbers.
//
// Usage: `cargo run --release --example simulate_market`

use metaexp::analyze::OutcomeKind;
use metaexp::sim::{generate_world, ground_truth, run_replication, SimConfig, StudyConfig};

pub fn run(n_listings: usize, n_guests: usize) -> metaexp::Result<()> {
    let sim = SimConfig {
        n_listings,
        n_markets: 32,
        latent_dim: 6,
        n_guests,
        consideration_k: 8,
        price_sensitivity: 1.5,
        treatment_price_multiplier: 1.3,
        capacity_per_listing: Some(6),
        base_utility: -0.6,
        seed: 99,
        ..SimConfig::default()
    };

    // Ground truth straight from the global counterfactuals.
    let world = generate_world(&sim)?;
    let gt = ground_truth(&world)?;
    println!(
        "ground truth TATE: {:+.4} bookings/listing, {:+.4} nights, {:+.2} spend",
        gt.tate(OutcomeKind::Bookings),
        gt.tate(OutcomeKind::Nights),
        gt.tate(OutcomeKind::GrossSpend),
    );
    let treated_total: u64 = gt.all_treated.outcomes.values().map(|o| o.bookings).sum();
    let control_total: u64 = gt.all_control.outcomes.values().map(|o| o.bookings).sum();
    println!("total bookings: all-treated {treated_total}, all-control {control_total}");

    // One full replication of the design + estimation pipeline, on a
    // fresh world drawn with the same parameters.
    let study = StudyConfig {
        sim,
        cluster_threshold: n_listings / 32,
        n_replications: 1,
        master_seed: 4,
        ..StudyConfig::default()
    };
    let record = run_replication(&study, 0)?;
    println!();
    println!("one pipeline replication (fresh world, same parameters):");
    println!(
        "pipeline: {} clusters -> {} strata ({} excluded)",
        record.n_clusters, record.n_strata, record.n_excluded_clusters
    );
    println!(
        "bernoulli arm estimate: {:+.4} (bias {:+.4})",
        record.bernoulli_estimate, record.bias_bernoulli
    );
    println!(
        "cluster arm estimate:   {:+.4} (bias {:+.4})",
        record.cluster_estimate, record.bias_cluster
    );
    println!("ground truth (this world): {:+.4}", record.ground_truth);
    Ok(())
}

fn main() -> metaexp::Result<()> {
    run(1600, 12_000)
}
