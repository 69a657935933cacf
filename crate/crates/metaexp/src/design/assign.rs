//! Meta-arm and treatment randomization.

use rand::Rng;

use super::strata::StratifiedDesign;
use crate::cluster::ClusterAssignment;
use crate::datamodel::{AssignmentRow, DesignAssignment, MetaArm};
use crate::error::{Error, Result};
use crate::seeds;

/// Randomization parameters. Defaults give the 2 / 3 / 3 split per stratum
/// of 8 with fair-coin listing assignment inside the Bernoulli arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    /// Clusters per stratum assigned to the Bernoulli arm.
    pub bernoulli_clusters_per_stratum: usize,
    /// Treatment probability (Bernoulli arm) and treated share of
    /// cluster-randomized clusters.
    pub treated_share: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        DesignParams { bernoulli_clusters_per_stratum: 2, treated_share: 0.5 }
    }
}

/// Assigns meta-arms and treatments.
///
/// Per stratum: `bernoulli_clusters_per_stratum` clusters go to the
/// Bernoulli arm by complete random assignment; of the remaining clusters,
/// `treated_share` are treated as whole clusters (exactly half at the
/// default), the rest are control. Listings inside Bernoulli-arm clusters
/// get independent coin-flip treatment. Deterministic given the seed.
pub fn assign_design(
    strata: &StratifiedDesign,
    clusters: &ClusterAssignment,
    seed: u64,
    params: DesignParams,
) -> Result<DesignAssignment> {
    let size = strata.stratum_size;
    let n_bern = params.bernoulli_clusters_per_stratum;
    if n_bern >= size {
        return Err(Error::Domain(
            "bernoulli_clusters_per_stratum must be smaller than the stratum size".into(),
        ));
    }
    if !(params.treated_share > 0.0 && params.treated_share < 1.0) {
        return Err(Error::Domain("treated_share must lie in (0, 1)".into()));
    }
    let n_cluster_arm = size - n_bern;
    let n_treated = (n_cluster_arm as f64 * params.treated_share).round() as usize;
    if n_treated == 0 || n_treated == n_cluster_arm {
        return Err(Error::Domain(
            "treated_share leaves an empty treated or control cluster group".into(),
        ));
    }

    let members = clusters.members();
    let mut rows = std::collections::BTreeMap::new();

    for (stratum_idx, stratum) in strata.strata.iter().enumerate() {
        if stratum.len() != size {
            return Err(Error::Domain(format!(
                "stratum {stratum_idx} has {} clusters, expected {size}",
                stratum.len()
            )));
        }
        let mut rng = seeds::rng(seed, "design-stratum", stratum_idx as u64);

        // Complete random assignment: draw the Bernoulli-arm clusters,
        // then the treated clusters among the rest.
        let bern_pick = rand::seq::index::sample(&mut rng, size, n_bern).into_vec();
        let rest: Vec<usize> = (0..size).filter(|i| !bern_pick.contains(i)).collect();
        let treated_pick = rand::seq::index::sample(&mut rng, rest.len(), n_treated).into_vec();

        for (pos, cluster_id) in stratum.iter().enumerate() {
            let member_listings = members
                .get(cluster_id.as_str())
                .ok_or_else(|| Error::UnknownListing(cluster_id.clone()))?;
            let (arm, cluster_treatment) = if bern_pick.contains(&pos) {
                (MetaArm::Bernoulli, None)
            } else {
                let rest_pos = rest.iter().position(|&r| r == pos).expect("pos in rest");
                (MetaArm::ClusterRandomized, Some(treated_pick.contains(&rest_pos)))
            };
            for &listing in member_listings {
                let treatment = match cluster_treatment {
                    Some(t) => t,
                    None => rng.random_bool(params.treated_share),
                };
                rows.insert(
                    listing.to_string(),
                    AssignmentRow {
                        cluster_id: cluster_id.clone(),
                        stratum_id: stratum_idx as u32,
                        meta_arm: arm,
                        treatment,
                    },
                );
            }
        }
    }

    let assignment = DesignAssignment {
        seed,
        provenance: format!(
            "assign_design stratum_size={size} bernoulli={n_bern} treated_share={}",
            params.treated_share
        ),
        rows,
    };
    assignment.validate()?;
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn fixture(n_clusters: usize, listings_per_cluster: usize) -> (StratifiedDesign, ClusterAssignment) {
        let cluster_ids: Vec<String> = (0..n_clusters).map(|i| format!("c{i:02}")).collect();
        let mut clusters = BTreeMap::new();
        let mut sizes = BTreeMap::new();
        for c in &cluster_ids {
            for l in 0..listings_per_cluster {
                clusters.insert(format!("{c}_l{l}"), c.clone());
            }
            sizes.insert(c.clone(), listings_per_cluster);
        }
        let strata: Vec<Vec<String>> =
            cluster_ids.chunks(8).map(|chunk| chunk.to_vec()).collect();
        (
            StratifiedDesign { strata, excluded: vec![], stratum_size: 8 },
            ClusterAssignment { clusters, threshold: 1, sizes },
        )
    }

    fn stratum_counts(a: &DesignAssignment, stratum: u32) -> (usize, usize, usize) {
        let mut bern = std::collections::HashSet::new();
        let mut treated = std::collections::HashSet::new();
        let mut control = std::collections::HashSet::new();
        for row in a.rows.values().filter(|r| r.stratum_id == stratum) {
            match row.meta_arm {
                MetaArm::Bernoulli => {
                    bern.insert(row.cluster_id.clone());
                }
                MetaArm::ClusterRandomized => {
                    if row.treatment {
                        treated.insert(row.cluster_id.clone());
                    } else {
                        control.insert(row.cluster_id.clone());
                    }
                }
            }
        }
        (bern.len(), treated.len(), control.len())
    }

    #[test]
    fn split_is_exactly_2_3_3() {
        let (strata, clusters) = fixture(16, 10);
        let a = assign_design(&strata, &clusters, 42, DesignParams::default()).unwrap();
        for stratum in [0u32, 1] {
            assert_eq!(stratum_counts(&a, stratum), (2, 3, 3));
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let (strata, clusters) = fixture(8, 25);
        let a = assign_design(&strata, &clusters, 7, DesignParams::default()).unwrap();
        let b = assign_design(&strata, &clusters, 7, DesignParams::default()).unwrap();
        assert_eq!(a, b);
        let c = assign_design(&strata, &clusters, 8, DesignParams::default()).unwrap();
        assert_ne!(a, c);
    }

    /// With homogeneous cluster sizes about a quarter of listings land in
    /// the Bernoulli arm.
    #[test]
    fn bernoulli_arm_holds_about_a_quarter_of_listings() {
        let (strata, clusters) = fixture(40, 50);
        let a = assign_design(&strata, &clusters, 3, DesignParams::default()).unwrap();
        let n_bern = a.rows.values().filter(|r| r.meta_arm == MetaArm::Bernoulli).count();
        let share = n_bern as f64 / a.rows.len() as f64;
        assert!((share - 0.25).abs() < 1e-9, "share {share}");
    }

    /// Treatment indicators inside the Bernoulli arm behave like
    /// independent fair coins: a runs test over the (deterministic) listing
    /// order stays within 4 sigma.
    #[test]
    fn bernoulli_treatments_pass_runs_test() {
        let (strata, clusters) = fixture(8, 2000);
        let a = assign_design(&strata, &clusters, 11, DesignParams::default()).unwrap();
        let flags: Vec<bool> = a
            .rows
            .values()
            .filter(|r| r.meta_arm == MetaArm::Bernoulli)
            .map(|r| r.treatment)
            .collect();
        let n = flags.len();
        assert!(n >= 3000, "expected a large Bernoulli arm, got {n}");
        let ones = flags.iter().filter(|&&t| t).count();
        let zeros = n - ones;
        let runs = 1 + flags.windows(2).filter(|w| w[0] != w[1]).count();
        let n1 = ones as f64;
        let n0 = zeros as f64;
        let expected = 1.0 + 2.0 * n1 * n0 / (n1 + n0);
        let var = (2.0 * n1 * n0 * (2.0 * n1 * n0 - n1 - n0))
            / ((n1 + n0).powi(2) * (n1 + n0 - 1.0));
        let z = (runs as f64 - expected) / var.sqrt();
        assert!(z.abs() < 4.0, "runs test z = {z}");
        // And the split is near half.
        assert!((n1 / n as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn unknown_cluster_in_strata_is_an_error() {
        let (mut strata, clusters) = fixture(8, 5);
        strata.strata[0][0] = "ghost".into();
        let err = assign_design(&strata, &clusters, 1, DesignParams::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownListing(id) if id == "ghost"));
    }
}
