//! Demand-capture diagnostics.
//!
//! Per-user metrics of how fully viewed listings fall inside single
//! clusters: the strict single-cluster share, the `1 - n_clusters /
//! n_listings` capture measure, the average top-cluster view share, the
//! view-share Herfindahl-Hirschman index, and top-cluster coverage rates at
//! fixed thresholds. Distinct listings drive `n_listings`; share metrics
//! use raw view counts.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ClusterAssignment;
use crate::datamodel::SearchSession;
use crate::error::{Error, Result};

/// Coverage thresholds reported by `pct_over`.
pub const OVER_THRESHOLDS: [f64; 3] = [0.67, 0.75, 0.90];

/// Which users enter the averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureFilters {
    /// Keep users who viewed only one distinct listing.
    pub include_single_view_users: bool,
    /// Keep only users with at least one booking session.
    pub bookers_only: bool,
}

impl Default for CaptureFilters {
    fn default() -> Self {
        CaptureFilters { include_single_view_users: true, bookers_only: false }
    }
}

/// Aggregated demand-capture metrics for one cluster assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandCaptureReport {
    pub filters: CaptureFilters,
    pub n_users: usize,
    pub pct_single_cluster: f64,
    pub demand_capture: f64,
    pub avg_cluster_share: f64,
    pub avg_hhi: f64,
    /// Keyed by the formatted threshold ("0.67", "0.75", "0.90").
    pub pct_over: BTreeMap<String, f64>,
}

impl DemandCaptureReport {
    pub fn pct_over_at(&self, threshold: f64) -> Option<f64> {
        self.pct_over.get(&format_threshold(threshold)).copied()
    }
}

fn format_threshold(t: f64) -> String {
    format!("{t:.2}")
}

/// Sum with pairwise reduction, so parallel/serial accumulation orders
/// agree to tight tolerance.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

struct UserViews {
    views: Vec<String>,
    booked: bool,
}

/// Computes the demand-capture report for the given sessions and clusters.
///
/// Sessions are grouped per user across the whole input; every viewed
/// listing must be clustered.
pub fn demand_capture_report(
    sessions: &[SearchSession],
    clusters: &ClusterAssignment,
    filters: CaptureFilters,
) -> Result<DemandCaptureReport> {
    let mut users: BTreeMap<&str, UserViews> = BTreeMap::new();
    for session in sessions {
        let entry = users
            .entry(session.user_id.as_str())
            .or_insert_with(|| UserViews { views: Vec::new(), booked: false });
        entry.views.extend(session.listings_viewed.iter().cloned());
        entry.booked |= session.booked;
    }

    let mut single_cluster = Vec::new();
    let mut capture = Vec::new();
    let mut top_share = Vec::new();
    let mut hhi = Vec::new();
    let mut over: Vec<Vec<f64>> = vec![Vec::new(); OVER_THRESHOLDS.len()];

    for user in users.values() {
        if filters.bookers_only && !user.booked {
            continue;
        }
        let distinct: HashSet<&str> = user.views.iter().map(String::as_str).collect();
        if !filters.include_single_view_users && distinct.len() <= 1 {
            continue;
        }
        let mut cluster_views: HashMap<&str, usize> = HashMap::new();
        let mut clusters_of_distinct: HashSet<&str> = HashSet::new();
        for view in &user.views {
            let cluster = clusters
                .cluster_of(view)
                .ok_or_else(|| Error::UnknownListing(view.clone()))?;
            *cluster_views.entry(cluster).or_insert(0) += 1;
        }
        for listing in &distinct {
            clusters_of_distinct.insert(clusters.cluster_of(listing).expect("checked above"));
        }

        let n_listings = distinct.len() as f64;
        let n_clusters = clusters_of_distinct.len() as f64;
        single_cluster.push(f64::from(n_clusters == 1.0));
        capture.push(1.0 - n_clusters / n_listings);

        let total_views = user.views.len() as f64;
        let top = cluster_views.values().copied().max().unwrap_or(0) as f64 / total_views;
        top_share.push(top);
        hhi.push(
            cluster_views
                .values()
                .map(|&v| {
                    let s = v as f64 / total_views;
                    s * s
                })
                .sum::<f64>(),
        );
        for (slot, &threshold) in OVER_THRESHOLDS.iter().enumerate() {
            over[slot].push(f64::from(top >= threshold));
        }
    }

    let n_users = capture.len();
    if n_users == 0 {
        return Err(Error::EmptyPopulation);
    }
    let mean = |xs: &[f64]| pairwise_sum(xs) / xs.len() as f64;

    let mut pct_over = BTreeMap::new();
    for (slot, &threshold) in OVER_THRESHOLDS.iter().enumerate() {
        pct_over.insert(format_threshold(threshold), mean(&over[slot]));
    }

    Ok(DemandCaptureReport {
        filters,
        n_users,
        pct_single_cluster: mean(&single_cluster),
        demand_capture: mean(&capture),
        avg_cluster_share: mean(&top_share),
        avg_hhi: mean(&hhi),
        pct_over,
    })
}
