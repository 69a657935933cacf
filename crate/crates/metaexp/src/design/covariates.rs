//! Cluster-level pre-treatment covariates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::datamodel::ListingRecord;
use crate::error::{Error, Result};

/// Which covariate set to aggregate. The pricing variant adds the share of
/// listings with smart pricing enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSet {
    #[default]
    Fee,
    Pricing,
}

/// Per-cluster covariate rows, aligned with `cluster_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCovariates {
    pub cluster_ids: Vec<String>,
    pub names: Vec<String>,
    /// One row per cluster, columns aligned with `names`.
    pub values: Vec<Vec<f64>>,
    /// Experiment-eligible listing count per cluster (also present as a
    /// covariate column).
    pub n_eligible: Vec<usize>,
}

impl ClusterCovariates {
    pub fn len(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_ids.is_empty()
    }
}

/// Aggregates listing data at the cluster level: average nights, bookings
/// and booking value per eligible listing, plus the eligible count.
pub fn compute_cluster_covariates(
    listings: &[ListingRecord],
    clusters: &ClusterAssignment,
    set: CovariateSet,
) -> Result<ClusterCovariates> {
    struct Acc {
        n: usize,
        nights: f64,
        bookings: f64,
        booking_value: f64,
        smart_pricing: f64,
    }
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for cluster in clusters.sizes.keys() {
        acc.insert(
            cluster.as_str(),
            Acc { n: 0, nights: 0.0, bookings: 0.0, booking_value: 0.0, smart_pricing: 0.0 },
        );
    }
    for listing in listings.iter().filter(|l| l.eligible) {
        let Some(cluster) = clusters.cluster_of(&listing.listing_id) else {
            return Err(Error::UnknownListing(listing.listing_id.clone()));
        };
        let slot = acc.get_mut(cluster).expect("cluster ids cover the assignment");
        slot.n += 1;
        slot.nights += listing.pre_nights as f64;
        slot.bookings += listing.pre_bookings as f64;
        slot.booking_value += listing.pre_booking_value;
        slot.smart_pricing += f64::from(listing.smart_pricing_on);
    }

    let mut names = vec![
        "avg_nights_per_listing".to_string(),
        "avg_bookings_per_listing".to_string(),
        "avg_booking_value_per_listing".to_string(),
        "n_eligible_listings".to_string(),
    ];
    if set == CovariateSet::Pricing {
        names.push("pct_smart_pricing_on".to_string());
    }

    let mut cluster_ids = Vec::with_capacity(acc.len());
    let mut values = Vec::with_capacity(acc.len());
    let mut n_eligible = Vec::with_capacity(acc.len());
    for (cluster, a) in acc {
        if a.n == 0 {
            return Err(Error::EmptyCluster(cluster.to_string()));
        }
        let n = a.n as f64;
        let mut row = vec![a.nights / n, a.bookings / n, a.booking_value / n, n];
        if set == CovariateSet::Pricing {
            row.push(a.smart_pricing / n);
        }
        cluster_ids.push(cluster.to_string());
        values.push(row);
        n_eligible.push(a.n);
    }

    Ok(ClusterCovariates { cluster_ids, names, values, n_eligible })
}
