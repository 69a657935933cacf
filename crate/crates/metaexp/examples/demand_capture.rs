// Demand-capture diagnostics and the cluster-size decision rule.
//
// Given user sessions and two candidate clusterings (a fine one and a
// coarse one), compute how fully each clustering captures users' browsing
// and decide whether the coarser clusters justify their power cost.
//
// Usage: `cargo run --release --example demand_capture`

use std::collections::BTreeMap;

use metaexp::cluster::{
    compare_cluster_sizes, demand_capture_report, mde_adjusted, size_rule_table,
    CaptureFilters, ClusterAssignment, SizeDecision,
};
use metaexp::datamodel::SearchSession;
use metaexp::report::capture_ratio_table;
use metaexp::seeds;
use rand::Rng;

fn clustering(n_listings: usize, per_cluster: usize) -> ClusterAssignment {
    let mut clusters = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    for l in 0..n_listings {
        let c = format!("c{:03}", l / per_cluster);
        clusters.insert(format!("l{l:04}"), c.clone());
        *sizes.entry(c).or_insert(0) += 1;
    }
    ClusterAssignment { clusters, threshold: per_cluster, sizes }
}

pub fn run(n_users: usize) -> metaexp::Result<()> {
    let n_listings = 400;
    // Users browse a contiguous neighborhood of listings, so bigger
    // clusters capture more of each user's views.
    let mut rng = seeds::rng(5, "example-sessions", 0);
    let mut sessions = Vec::new();
    for u in 0..n_users {
        let anchor = rng.random_range(0..n_listings);
        let breadth = rng.random_range(2..18usize);
        let viewed: Vec<String> = (0..breadth)
            .map(|_| {
                let jitter = rng.random_range(0..30usize);
                format!("l{:04}", (anchor + jitter) % n_listings)
            })
            .collect();
        sessions.push(SearchSession {
            user_id: format!("u{u:04}"),
            listings_viewed: viewed,
            booked: rng.random_bool(0.35),
        });
    }

    let fine = clustering(n_listings, 20);
    let coarse = clustering(n_listings, 80);

    for (name, clusters) in [("fine (20/cluster)", &fine), ("coarse (80/cluster)", &coarse)] {
        let r = demand_capture_report(&sessions, clusters, CaptureFilters::default())?;
        println!(
            "{name:<20} demand capture {:.3}, single-cluster share {:.3}, avg HHI {:.3}",
            r.demand_capture, r.pct_single_cluster, r.avg_hhi
        );
    }

    println!();
    println!("capture ratios (coarse / fine) over the filter grid:");
    let table = size_rule_table(&sessions, &fine, &coarse)?;
    print!("{}", capture_ratio_table(&table));

    // Suppose power analysis said the fine clusters offer a 0.9% MDE and
    // the coarse ones 1.05%; is the capture gain worth it?
    let fine_capture = demand_capture_report(&sessions, &fine, CaptureFilters::default())?;
    let coarse_capture = demand_capture_report(&sessions, &coarse, CaptureFilters::default())?;
    let outcome = compare_cluster_sizes(
        fine_capture.demand_capture,
        coarse_capture.demand_capture,
        0.009,
        0.0105,
    )?;
    println!();
    println!(
        "capture ratio {:.3} vs MDE ratio {:.3} -> {}",
        outcome.capture_ratio,
        outcome.mde_ratio,
        match outcome.decision {
            SizeDecision::PreferLarge => "prefer the larger clusters",
            SizeDecision::PreferSmall => "keep the smaller clusters",
        }
    );
    println!(
        "capture-adjusted MDEs: fine {:.4}, coarse {:.4}",
        mde_adjusted(0.009, fine_capture.demand_capture)?,
        mde_adjusted(0.0105, coarse_capture.demand_capture)?,
    );
    Ok(())
}

fn main() -> metaexp::Result<()> {
    run(2000)
}
