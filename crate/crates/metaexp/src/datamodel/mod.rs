//! Core data types shared by the whole pipeline, with validation and
//! file ingestion/persistence.
//!
//! Listings and outcome panels travel as CSV (flat tables); search sessions
//! and design assignments travel as JSONL (variable-length / nested data).
//! All types are immutable after construction and safe to share across
//! threads.

mod io;

pub use io::{
    load_assignment, load_listings, load_outcomes, load_sessions, save_assignment, save_outcomes,
    ListingFormat, ASSIGNMENT_SCHEMA_VERSION,
};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Host tenure bucket used by the fee intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TenureClass {
    LongTenured,
    LessTenured,
}

/// One marketplace unit: identifiers, market, eligibility and
/// pre-treatment outcome covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListingRecord {
    pub listing_id: String,
    pub market_id: String,
    pub eligible: bool,
    pub tenure_class: TenureClass,
    pub pre_bookings: u64,
    pub pre_nights: u64,
    pub pre_booking_value: f64,
    pub pre_gross_spend: f64,
    pub smart_pricing_on: bool,
    /// Market-level constrainedness indices are computed upstream and may be
    /// absent; operations that need them fail fast instead of imputing.
    pub supply_elasticity_index: Option<f64>,
    pub demand_elasticity_index: Option<f64>,
}

impl ListingRecord {
    /// Checks the per-record invariants: finite, non-negative metrics.
    pub fn validate(&self) -> Result<()> {
        if self.listing_id.is_empty() {
            return Err(Error::schema(None, "empty listing_id"));
        }
        for (name, v) in [
            ("pre_booking_value", self.pre_booking_value),
            ("pre_gross_spend", self.pre_gross_spend),
        ] {
            if !v.is_finite() {
                return Err(Error::schema(None, format!("non-finite metric {name}")));
            }
            if v < 0.0 {
                return Err(Error::schema(None, format!("negative metric {name}")));
            }
        }
        for idx in [self.supply_elasticity_index, self.demand_elasticity_index].into_iter().flatten() {
            if !idx.is_finite() {
                return Err(Error::schema(None, "non-finite elasticity index"));
            }
        }
        Ok(())
    }
}

/// Checks cross-record invariants for a listing dataset (unique ids).
pub fn validate_listings(listings: &[ListingRecord]) -> Result<()> {
    let mut seen = HashSet::with_capacity(listings.len());
    for (i, rec) in listings.iter().enumerate() {
        rec.validate().map_err(|e| match e {
            Error::Schema { message, .. } => Error::schema(i + 1, message),
            other => other,
        })?;
        if !seen.insert(rec.listing_id.as_str()) {
            return Err(Error::schema(i + 1, format!("duplicate listing_id `{}`", rec.listing_id)));
        }
    }
    Ok(())
}

/// Ordered sequence of listings viewed by one user in one search session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSession {
    pub user_id: String,
    pub listings_viewed: Vec<String>,
    pub booked: bool,
}

impl SearchSession {
    pub fn validate(&self) -> Result<()> {
        if self.listings_viewed.is_empty() {
            return Err(Error::schema(None, "session with empty listings_viewed"));
        }
        Ok(())
    }

    /// Errors with `UnknownListing` if any viewed id is absent from `known`.
    pub fn check_resolvable(&self, known: &HashSet<&str>) -> Result<()> {
        for id in &self.listings_viewed {
            if !known.contains(id.as_str()) {
                return Err(Error::UnknownListing(id.clone()));
            }
        }
        Ok(())
    }
}

/// Per-listing outcomes over the experiment window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Outcome {
    pub bookings: u64,
    pub nights: u64,
    pub gross_spend: f64,
}

/// Outcome rows keyed by listing id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomePanel {
    pub outcomes: BTreeMap<String, Outcome>,
}

impl OutcomePanel {
    pub fn get(&self, listing_id: &str) -> Option<&Outcome> {
        self.outcomes.get(listing_id)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, o) in &self.outcomes {
            if !o.gross_spend.is_finite() || o.gross_spend < 0.0 {
                return Err(Error::schema(None, format!("invalid gross_spend for `{id}`")));
            }
        }
        Ok(())
    }
}

/// Which randomization scheme a cluster was assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaArm {
    /// Treatment assigned independently per listing.
    Bernoulli,
    /// Treatment assigned to the whole cluster.
    ClusterRandomized,
}

/// A single listing's design row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub cluster_id: String,
    pub stratum_id: u32,
    pub meta_arm: MetaArm,
    pub treatment: bool,
}

/// The complete experiment design: per-listing cluster, stratum, meta-arm
/// and treatment, plus the randomization seed and provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignAssignment {
    pub seed: u64,
    pub provenance: String,
    pub rows: BTreeMap<String, AssignmentRow>,
}

impl DesignAssignment {
    /// Validates the design invariants:
    /// all listings sharing a cluster share meta-arm, and in the
    /// cluster-randomized arm they also share treatment.
    pub fn validate(&self) -> Result<()> {
        let mut by_cluster: HashMap<&str, (&AssignmentRow, &str)> = HashMap::new();
        for (listing, row) in &self.rows {
            match by_cluster.get(row.cluster_id.as_str()) {
                None => {
                    by_cluster.insert(row.cluster_id.as_str(), (row, listing));
                }
                Some((first, first_listing)) => {
                    if first.meta_arm != row.meta_arm {
                        return Err(Error::schema(
                            None,
                            format!(
                                "cluster `{}` has mixed meta-arms (listings `{first_listing}`, `{listing}`)",
                                row.cluster_id
                            ),
                        ));
                    }
                    if row.meta_arm == MetaArm::ClusterRandomized && first.treatment != row.treatment {
                        return Err(Error::schema(
                            None,
                            format!(
                                "cluster-randomized cluster `{}` has mixed treatments (listings `{first_listing}`, `{listing}`)",
                                row.cluster_id
                            ),
                        ));
                    }
                    if first.stratum_id != row.stratum_id {
                        return Err(Error::schema(
                            None,
                            format!("cluster `{}` spans multiple strata", row.cluster_id),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every eligible listing in `listings` is assigned.
    pub fn check_covers(&self, listings: &[ListingRecord]) -> Result<()> {
        for rec in listings.iter().filter(|r| r.eligible) {
            if !self.rows.contains_key(&rec.listing_id) {
                return Err(Error::schema(
                    None,
                    format!("eligible listing `{}` is not assigned", rec.listing_id),
                ));
            }
        }
        Ok(())
    }

    /// Listing ids in the given meta-arm, in sorted order.
    pub fn arm_listings(&self, arm: MetaArm) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|(_, row)| row.meta_arm == arm)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Distinct stratum ids present in the assignment.
    pub fn strata(&self) -> BTreeSet<u32> {
        self.rows.values().map(|r| r.stratum_id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn listing(id: &str) -> ListingRecord {
        ListingRecord {
            listing_id: id.to_string(),
            market_id: "m1".to_string(),
            eligible: true,
            tenure_class: TenureClass::LongTenured,
            pre_bookings: 1,
            pre_nights: 2,
            pre_booking_value: 100.0,
            pre_gross_spend: 120.0,
            smart_pricing_on: false,
            supply_elasticity_index: None,
            demand_elasticity_index: None,
        }
    }

    #[test]
    fn duplicate_listing_ids_rejected() {
        let rows = vec![listing("a"), listing("a")];
        let err = validate_listings(&rows).unwrap_err();
        match err {
            Error::Schema { row, message } => {
                assert_eq!(row, Some(2));
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_metric_rejected() {
        let mut rec = listing("a");
        rec.pre_booking_value = -1.0;
        let err = validate_listings(&[rec]).unwrap_err();
        assert!(err.to_string().contains("negative metric"));
    }

    #[test]
    fn empty_session_rejected() {
        let s = SearchSession { user_id: "u".into(), listings_viewed: vec![], booked: false };
        assert!(s.validate().is_err());
    }

    #[test]
    fn mixed_treatment_in_cluster_arm_rejected() {
        let mut rows = BTreeMap::new();
        rows.insert(
            "a".to_string(),
            AssignmentRow {
                cluster_id: "c0".into(),
                stratum_id: 0,
                meta_arm: MetaArm::ClusterRandomized,
                treatment: true,
            },
        );
        rows.insert(
            "b".to_string(),
            AssignmentRow {
                cluster_id: "c0".into(),
                stratum_id: 0,
                meta_arm: MetaArm::ClusterRandomized,
                treatment: false,
            },
        );
        let a = DesignAssignment { seed: 1, provenance: "test".into(), rows };
        assert!(a.validate().is_err());
    }

    #[test]
    fn mixed_treatment_in_bernoulli_arm_allowed() {
        let mut rows = BTreeMap::new();
        for (id, t) in [("a", true), ("b", false)] {
            rows.insert(
                id.to_string(),
                AssignmentRow {
                    cluster_id: "c0".into(),
                    stratum_id: 0,
                    meta_arm: MetaArm::Bernoulli,
                    treatment: t,
                },
            );
        }
        let a = DesignAssignment { seed: 1, provenance: "test".into(), rows };
        assert!(a.validate().is_ok());
    }
}
