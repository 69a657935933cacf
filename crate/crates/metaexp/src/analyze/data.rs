//! Row data feeding the estimators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{DesignAssignment, ListingRecord, MetaArm, Outcome, OutcomePanel};
use crate::error::{Error, Result};

/// Outcome column selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    #[default]
    Bookings,
    Nights,
    GrossSpend,
}

impl OutcomeKind {
    pub fn of(self, o: &Outcome) -> f64 {
        match self {
            OutcomeKind::Bookings => o.bookings as f64,
            OutcomeKind::Nights => o.nights as f64,
            OutcomeKind::GrossSpend => o.gross_spend,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OutcomeKind::Bookings => "bookings",
            OutcomeKind::Nights => "nights",
            OutcomeKind::GrossSpend => "gross_spend",
        }
    }
}

/// Pre-treatment covariate columns carried into the regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionCovariates {
    /// Pre-treatment bookings, nights, booking value and gross spend.
    #[default]
    Standard,
    /// Standard plus the smart-pricing opt-in flag.
    WithSmartPricing,
    /// Bookings, nights and booking value only. Used with simulated data,
    /// where booking value and gross spend coincide in an untreated
    /// pre-period and would be collinear.
    BookingsNightsValue,
    None,
}

impl RegressionCovariates {
    pub fn names(self) -> Vec<String> {
        let mut names = match self {
            RegressionCovariates::None => return Vec::new(),
            RegressionCovariates::BookingsNightsValue => {
                return vec![
                    "pre_bookings".to_string(),
                    "pre_nights".to_string(),
                    "pre_booking_value".to_string(),
                ]
            }
            _ => vec![
                "pre_bookings".to_string(),
                "pre_nights".to_string(),
                "pre_booking_value".to_string(),
                "pre_gross_spend".to_string(),
            ],
        };
        if self == RegressionCovariates::WithSmartPricing {
            names.push("smart_pricing_on".to_string());
        }
        names
    }

    pub fn row(self, listing: &ListingRecord) -> Vec<f64> {
        let mut row = match self {
            RegressionCovariates::None => return Vec::new(),
            RegressionCovariates::BookingsNightsValue => {
                return vec![
                    listing.pre_bookings as f64,
                    listing.pre_nights as f64,
                    listing.pre_booking_value,
                ]
            }
            _ => vec![
                listing.pre_bookings as f64,
                listing.pre_nights as f64,
                listing.pre_booking_value,
                listing.pre_gross_spend,
            ],
        };
        if self == RegressionCovariates::WithSmartPricing {
            row.push(f64::from(listing.smart_pricing_on));
        }
        row
    }
}

/// One estimation dataset: outcome, design columns, covariates, strata and
/// the cluster ids used for clustered standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub unit_ids: Vec<String>,
    pub y: Vec<f64>,
    pub treatment: Vec<f64>,
    /// Bernoulli-arm indicator; required by the joint specification.
    pub bernoulli: Option<Vec<f64>>,
    pub stratum: Vec<u32>,
    /// Row-major covariate rows, aligned with `covariate_names`.
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    /// Error-clustering unit per row.
    pub se_cluster: Vec<String>,
    pub weights: Option<Vec<f64>>,
}

impl RegressionData {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        let lengths = [
            self.unit_ids.len(),
            self.treatment.len(),
            self.stratum.len(),
            self.covariates.len(),
            self.se_cluster.len(),
        ];
        if lengths.iter().any(|&l| l != n) {
            return Err(Error::DimensionMismatch { expected: n, got: *lengths.iter().find(|&&l| l != n).unwrap() });
        }
        if let Some(b) = &self.bernoulli {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.len() });
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: w.len() });
            }
            if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::Domain("weights must be positive and finite".into()));
            }
        }
        let k = self.covariate_names.len();
        if self.covariates.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: 0 });
        }
        Ok(())
    }

    /// Listing-level rows for one meta-arm (or both when `arm` is None).
    pub fn from_experiment(
        outcomes: &OutcomePanel,
        assignment: &DesignAssignment,
        listings: &[ListingRecord],
        outcome: OutcomeKind,
        covariates: RegressionCovariates,
        arm: Option<MetaArm>,
    ) -> Result<RegressionData> {
        let by_id: BTreeMap<&str, &ListingRecord> =
            listings.iter().map(|l| (l.listing_id.as_str(), l)).collect();
        let mut data = RegressionData {
            unit_ids: Vec::new(),
            y: Vec::new(),
            treatment: Vec::new(),
            bernoulli: if arm.is_none() { Some(Vec::new()) } else { None },
            stratum: Vec::new(),
            covariates: Vec::new(),
            covariate_names: covariates.names(),
            se_cluster: Vec::new(),
            weights: None,
        };
        for (listing_id, row) in &assignment.rows {
            if let Some(wanted) = arm {
                if row.meta_arm != wanted {
                    continue;
                }
            }
            let Some(listing) = by_id.get(listing_id.as_str()) else {
                return Err(Error::UnknownListing(listing_id.clone()));
            };
            if !listing.eligible {
                continue;
            }
            let Some(outcome_row) = outcomes.get(listing_id) else {
                return Err(Error::schema(None, format!("listing `{listing_id}` missing from outcomes")));
            };
            data.unit_ids.push(listing_id.clone());
            data.y.push(outcome.of(outcome_row));
            data.treatment.push(f64::from(row.treatment));
            if let Some(b) = data.bernoulli.as_mut() {
                b.push(f64::from(row.meta_arm == MetaArm::Bernoulli));
            }
            data.stratum.push(row.stratum_id);
            data.covariates.push(covariates.row(listing));
            data.se_cluster.push(row.cluster_id.clone());
        }
        if data.y.is_empty() {
            return Err(Error::EmptyGroup("no rows after arm/eligibility filtering".into()));
        }
        data.validate()?;
        Ok(data)
    }
}
