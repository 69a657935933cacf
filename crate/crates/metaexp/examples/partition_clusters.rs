// Cut listing clusters of controllable size out of an embedding space.
//
// A recursive 2-means tree is grown once; cutting it at different size
// thresholds yields coarser or finer clusterings without re-clustering.
//
// Usage: `cargo run --release --example partition_clusters`

use metaexp::cluster::{assign_clusters, build_partition_tree_points};
use metaexp::seeds;
use rand::Rng;

pub fn run(n_groups: usize, per_group: usize) -> metaexp::Result<()> {
    // Synthetic embedding space: well-separated groups with local spread.
    let mut rng = seeds::rng(11, "example-points", 0);
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for g in 0..n_groups {
        let center: Vec<f64> = (0..4).map(|_| rng.random_range(-30.0..30.0)).collect();
        for i in 0..per_group {
            ids.push(format!("g{g:02}_l{i:03}"));
            points.push(center.iter().map(|&c| c + rng.random_range(-1.0..1.0)).collect());
        }
    }

    let tree = build_partition_tree_points(ids, points, 20, 20, 3)?;
    println!(
        "partition tree over {} listings: {} nodes, {} leaves",
        n_groups * per_group,
        tree.len(),
        tree.leaves().count()
    );

    let mut last = usize::MAX;
    for threshold in [25, 50, 100, 200, 100_000] {
        let clusters = assign_clusters(&tree, threshold)?;
        let sizes: Vec<usize> = clusters.sizes.values().copied().collect();
        println!(
            "threshold {threshold:>6}: {:>3} clusters, sizes {:?}",
            clusters.n_clusters(),
            sizes
        );
        assert!(clusters.n_clusters() <= last, "coarsening must not add clusters");
        last = clusters.n_clusters();
    }
    Ok(())
}

fn main() -> metaexp::Result<()> {
    run(8, 50)
}
