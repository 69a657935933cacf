//! Pre-treatment balance checks between randomization groups.

use serde::{Deserialize, Serialize};

use crate::analyze::{ks_test, KsResult};
use crate::datamodel::{DesignAssignment, ListingRecord, MetaArm};
use crate::error::{Error, Result};

/// Which two groups to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceGrouping {
    /// Bernoulli arm vs cluster-randomized arm.
    MetaArm,
    /// Treated vs control inside the Bernoulli arm.
    TreatmentWithinBernoulli,
    /// Treated vs control inside the cluster-randomized arm.
    TreatmentWithinClusterArm,
}

/// KS statistic and p-value for one pre-treatment metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBalance {
    pub metric: String,
    pub d: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Balance report over the three pre-treatment metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub grouping: BalanceGrouping,
    pub metrics: Vec<MetricBalance>,
}

type MetricExtractor = fn(&ListingRecord) -> f64;

const METRICS: [(&str, MetricExtractor); 3] = [
    ("pre_bookings", |l| l.pre_bookings as f64),
    ("pre_nights", |l| l.pre_nights as f64),
    ("pre_booking_value", |l| l.pre_booking_value),
];

/// Runs KS tests on pre-treatment bookings, nights and booking value
/// between the two groups selected by `grouping`.
pub fn balance_check(
    listings: &[ListingRecord],
    assignment: &DesignAssignment,
    grouping: BalanceGrouping,
) -> Result<BalanceReport> {
    let side = |listing: &ListingRecord| -> Option<bool> {
        let row = assignment.rows.get(&listing.listing_id)?;
        match grouping {
            BalanceGrouping::MetaArm => Some(row.meta_arm == MetaArm::Bernoulli),
            BalanceGrouping::TreatmentWithinBernoulli => {
                (row.meta_arm == MetaArm::Bernoulli).then_some(row.treatment)
            }
            BalanceGrouping::TreatmentWithinClusterArm => {
                (row.meta_arm == MetaArm::ClusterRandomized).then_some(row.treatment)
            }
        }
    };

    let mut metrics = Vec::with_capacity(METRICS.len());
    for (name, extract) in METRICS {
        let mut group_a = Vec::new();
        let mut group_b = Vec::new();
        for listing in listings.iter().filter(|l| l.eligible) {
            match side(listing) {
                Some(true) => group_a.push(extract(listing)),
                Some(false) => group_b.push(extract(listing)),
                None => {}
            }
        }
        if group_a.is_empty() || group_b.is_empty() {
            return Err(Error::EmptyGroup(format!("{grouping:?} left a side empty for {name}")));
        }
        let KsResult { d, p_value, n_a, n_b } = ks_test(&group_a, &group_b)?;
        metrics.push(MetricBalance { metric: name.to_string(), d, p_value, n_a, n_b });
    }
    Ok(BalanceReport { grouping, metrics })
}
