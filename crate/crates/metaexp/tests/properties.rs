//! Property tests for the cross-cutting invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use metaexp::analyze::{bias_share, ks_test};
use metaexp::cluster::{assign_clusters, build_partition_tree_points};
use metaexp::datamodel::{
    load_assignment, save_assignment, AssignmentRow, DesignAssignment, MetaArm,
};

fn points_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // Clumpy 2-d point sets: a few centers with local jitter.
    (2usize..6, 40usize..120).prop_flat_map(|(centers, n)| {
        let center_coords =
            prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), centers..=centers);
        let assignments = prop::collection::vec(0usize..centers, n..=n);
        let jitter = prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n..=n);
        (center_coords, assignments, jitter).prop_map(|(cs, asg, js)| {
            asg.iter()
                .zip(js)
                .map(|(&c, (jx, jy))| vec![cs[c].0 + jx, cs[c].1 + jy])
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every threshold cut partitions the listing set, and coarser cuts
    /// never have more clusters.
    #[test]
    fn cluster_cuts_partition_and_coarsen(points in points_strategy(), seed in 0u64..1000) {
        let ids: Vec<String> = (0..points.len()).map(|i| format!("l{i:03}")).collect();
        let tree = build_partition_tree_points(ids.clone(), points, 20, 5, seed).unwrap();
        tree.check_invariants(5, 20).unwrap();

        let mut previous = usize::MAX;
        for threshold in [1usize, 5, 10, 25, 60, 1_000] {
            let cut = assign_clusters(&tree, threshold).unwrap();
            // Partition: every listing appears exactly once.
            prop_assert_eq!(cut.clusters.len(), ids.len());
            let total: usize = cut.sizes.values().sum();
            prop_assert_eq!(total, ids.len());
            // Monotone coarsening.
            prop_assert!(cut.n_clusters() <= previous);
            previous = cut.n_clusters();
        }
    }

    /// KS is symmetric in its arguments and invariant under strictly
    /// monotone transforms applied to both samples.
    #[test]
    fn ks_symmetry_and_monotone_invariance(
        a in prop::collection::vec(-100.0..100.0f64, 1..60),
        b in prop::collection::vec(-100.0..100.0f64, 1..60),
        scale in 0.1..5.0f64,
    ) {
        let ab = ks_test(&a, &b).unwrap();
        let ba = ks_test(&b, &a).unwrap();
        prop_assert_eq!(ab.d, ba.d);
        prop_assert_eq!(ab.p_value, ba.p_value);

        let transform = |x: f64| (x * scale / 30.0).tanh() * 10.0 + x * scale;
        let ta: Vec<f64> = a.iter().map(|&x| transform(x)).collect();
        let tb: Vec<f64> = b.iter().map(|&x| transform(x)).collect();
        let t = ks_test(&ta, &tb).unwrap();
        prop_assert!((t.d - ab.d).abs() < 1e-12);
    }

    /// Assignment files round-trip exactly.
    #[test]
    fn assignment_roundtrip(
        seed in any::<u64>(),
        n_clusters in 1usize..8,
        per_cluster in 1usize..6,
        arm_bits in any::<u32>(),
    ) {
        let mut rows = BTreeMap::new();
        for c in 0..n_clusters {
            let bernoulli = (arm_bits >> c) & 1 == 1;
            let cluster_treated = (arm_bits >> (c + 8)) & 1 == 1;
            for l in 0..per_cluster {
                let treated = if bernoulli {
                    (arm_bits >> ((c + l) % 31)) & 1 == 1
                } else {
                    cluster_treated
                };
                rows.insert(
                    format!("c{c}_l{l}"),
                    AssignmentRow {
                        cluster_id: format!("c{c}"),
                        stratum_id: (c % 3) as u32,
                        meta_arm: if bernoulli { MetaArm::Bernoulli } else { MetaArm::ClusterRandomized },
                        treatment: treated,
                    },
                );
            }
        }
        let assignment = DesignAssignment { seed, provenance: "prop".into(), rows };
        let file = tempfile::NamedTempFile::new().unwrap();
        save_assignment(&assignment, file.path()).unwrap();
        let loaded = load_assignment(file.path()).unwrap();
        prop_assert_eq!(assignment, loaded);
    }

    /// The bias share is invariant to rescaling the outcome (both
    /// coefficients scale together).
    #[test]
    fn bias_share_scale_invariant(
        beta in -10.0..10.0f64,
        nu in -10.0..10.0f64,
        scale in prop::sample::select(vec![0.01f64, 0.5, 3.0, 250.0]),
    ) {
        prop_assume!((beta + nu).abs() > 1e-6);
        let base = bias_share(beta, nu).unwrap();
        let scaled = bias_share(beta * scale, nu * scale).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9 * base.abs().max(1.0));
    }
}
