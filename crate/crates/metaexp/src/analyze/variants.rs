//! Alternative units of analysis: cluster-aggregated and mixed-unit fits,
//! plus constrained-market subsetting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::data::{OutcomeKind, RegressionCovariates, RegressionData};
use super::ols::{ols_fit, FitOptions, RegressionFit, SeMode, SpecKind};
use crate::datamodel::{DesignAssignment, ListingRecord, MetaArm, OutcomePanel};
use crate::error::{Error, Result};

/// Per-cluster aggregate used by the cluster-level and mixed-unit fits.
struct ClusterAgg {
    stratum: u32,
    treatment: f64,
    n: usize,
    y_sum: f64,
    cov_sums: Vec<f64>,
}

fn aggregate_cluster_arm(
    outcomes: &OutcomePanel,
    assignment: &DesignAssignment,
    listings: &[ListingRecord],
    outcome: OutcomeKind,
    covariates: RegressionCovariates,
) -> Result<BTreeMap<String, ClusterAgg>> {
    let by_id: BTreeMap<&str, &ListingRecord> =
        listings.iter().map(|l| (l.listing_id.as_str(), l)).collect();
    let k = covariates.names().len();
    let mut aggs: BTreeMap<String, ClusterAgg> = BTreeMap::new();
    for (listing_id, row) in &assignment.rows {
        if row.meta_arm != MetaArm::ClusterRandomized {
            continue;
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
        let agg = aggs.entry(row.cluster_id.clone()).or_insert_with(|| ClusterAgg {
            stratum: row.stratum_id,
            treatment: f64::from(row.treatment),
            n: 0,
            y_sum: 0.0,
            cov_sums: vec![0.0; k],
        });
        agg.n += 1;
        agg.y_sum += outcome.of(outcome_row);
        for (acc, v) in agg.cov_sums.iter_mut().zip(covariates.row(listing)) {
            *acc += v;
        }
    }
    if aggs.is_empty() {
        return Err(Error::EmptyGroup("no cluster-randomized rows".into()));
    }
    Ok(aggs)
}

/// Cluster-level analysis of the cluster-randomized arm: per-cluster means
/// fitted by weighted least squares with eligible-listing-count weights.
pub fn cluster_aggregated_fit(
    outcomes: &OutcomePanel,
    assignment: &DesignAssignment,
    listings: &[ListingRecord],
    outcome: OutcomeKind,
    covariates: RegressionCovariates,
) -> Result<RegressionFit> {
    let aggs = aggregate_cluster_arm(outcomes, assignment, listings, outcome, covariates)?;
    let mut data = RegressionData {
        unit_ids: Vec::new(),
        y: Vec::new(),
        treatment: Vec::new(),
        bernoulli: None,
        stratum: Vec::new(),
        covariates: Vec::new(),
        covariate_names: covariates.names(),
        se_cluster: Vec::new(),
        weights: Some(Vec::new()),
    };
    for (cluster_id, agg) in &aggs {
        let n = agg.n as f64;
        data.unit_ids.push(cluster_id.clone());
        data.y.push(agg.y_sum / n);
        data.treatment.push(agg.treatment);
        data.stratum.push(agg.stratum);
        data.covariates.push(agg.cov_sums.iter().map(|s| s / n).collect());
        data.se_cluster.push(cluster_id.clone());
        data.weights.as_mut().unwrap().push(n);
    }
    let mut fit = ols_fit(
        &data,
        FitOptions { kind: SpecKind::ArmLevel, se: SeMode::Robust, ..FitOptions::default() },
    )?;
    fit.outcome = outcome.label().to_string();
    Ok(fit)
}

/// Mixed-unit joint analysis: Bernoulli-arm rows enter at the listing level
/// with weight 1; cluster-arm rows enter as per-cluster means weighted by
/// their eligible listing counts.
pub fn mixed_unit_fit(
    outcomes: &OutcomePanel,
    assignment: &DesignAssignment,
    listings: &[ListingRecord],
    outcome: OutcomeKind,
    covariates: RegressionCovariates,
) -> Result<RegressionFit> {
    let by_id: BTreeMap<&str, &ListingRecord> =
        listings.iter().map(|l| (l.listing_id.as_str(), l)).collect();
    let mut data = RegressionData {
        unit_ids: Vec::new(),
        y: Vec::new(),
        treatment: Vec::new(),
        bernoulli: Some(Vec::new()),
        stratum: Vec::new(),
        covariates: Vec::new(),
        covariate_names: covariates.names(),
        se_cluster: Vec::new(),
        weights: Some(Vec::new()),
    };

    let mut saw_bernoulli = false;
    for (listing_id, row) in &assignment.rows {
        if row.meta_arm != MetaArm::Bernoulli {
            continue;
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
        saw_bernoulli = true;
        data.unit_ids.push(listing_id.clone());
        data.y.push(outcome.of(outcome_row));
        data.treatment.push(f64::from(row.treatment));
        data.bernoulli.as_mut().unwrap().push(1.0);
        data.stratum.push(row.stratum_id);
        data.covariates.push(covariates.row(listing));
        data.se_cluster.push(row.cluster_id.clone());
        data.weights.as_mut().unwrap().push(1.0);
    }
    if !saw_bernoulli {
        return Err(Error::EmptyGroup("no bernoulli-arm rows".into()));
    }

    let aggs = aggregate_cluster_arm(outcomes, assignment, listings, outcome, covariates)?;
    for (cluster_id, agg) in &aggs {
        let n = agg.n as f64;
        data.unit_ids.push(cluster_id.clone());
        data.y.push(agg.y_sum / n);
        data.treatment.push(agg.treatment);
        data.bernoulli.as_mut().unwrap().push(0.0);
        data.stratum.push(agg.stratum);
        data.covariates.push(agg.cov_sums.iter().map(|s| s / n).collect());
        data.se_cluster.push(cluster_id.clone());
        data.weights.as_mut().unwrap().push(n);
    }

    let mut fit = ols_fit(
        &data,
        FitOptions { kind: SpecKind::Joint, se: SeMode::Robust, ..FitOptions::default() },
    )?;
    fit.outcome = outcome.label().to_string();
    Ok(fit)
}

/// Which constrainedness index drives the subsetting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Supply,
    Demand,
}

/// Nearest-rank quantile of a sorted slice; ties are kept by the caller's
/// `>=` comparison against the returned cut point.
fn quantile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Keeps listings in markets at or above the listing-weighted median market
/// size, then keeps those whose chosen elasticity index is at or above the
/// listing-weighted 75th quantile among the remaining listings.
pub fn constrained_subset(
    listings: &[ListingRecord],
    which: ConstraintKind,
) -> Result<Vec<ListingRecord>> {
    if listings.is_empty() {
        return Err(Error::EmptyGroup("no listings to subset".into()));
    }
    let index_of = |l: &ListingRecord| -> Result<f64> {
        let v = match which {
            ConstraintKind::Supply => l.supply_elasticity_index,
            ConstraintKind::Demand => l.demand_elasticity_index,
        };
        v.ok_or_else(|| Error::MissingIndex(l.listing_id.clone()))
    };
    // Fail fast on any missing index before filtering.
    for l in listings {
        index_of(l)?;
    }

    let mut market_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for l in listings {
        *market_sizes.entry(l.market_id.as_str()).or_insert(0) += 1;
    }
    // Listing-weighted median market size: every listing contributes its
    // market's size once.
    let mut per_listing_sizes: Vec<f64> =
        listings.iter().map(|l| market_sizes[l.market_id.as_str()] as f64).collect();
    per_listing_sizes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_size = quantile_nearest_rank(&per_listing_sizes, 0.5);

    let large_market: Vec<&ListingRecord> = listings
        .iter()
        .filter(|l| market_sizes[l.market_id.as_str()] as f64 >= median_size)
        .collect();

    let mut index_values: Vec<f64> =
        large_market.iter().map(|l| index_of(l).expect("checked")).collect();
    index_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q75 = quantile_nearest_rank(&index_values, 0.75);

    let subset: Vec<ListingRecord> = large_market
        .into_iter()
        .filter(|l| index_of(l).expect("checked") >= q75)
        .cloned()
        .collect();
    if subset.is_empty() {
        return Err(Error::EmptyGroup("constrained subset is empty".into()));
    }
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::data::OutcomeKind;
    use crate::analyze::ols::FeMode;
    use crate::datamodel::{AssignmentRow, Outcome};
    use crate::datamodel::TenureClass;
    use rand::Rng;

    /// With equal cluster sizes the listing-count weights are constant, so
    /// the aggregated fit must match an unweighted regression on the same
    /// cluster means.
    #[test]
    fn equal_cluster_sizes_match_unweighted_cluster_means() {
        let mut rng = crate::seeds::rng(13, "variants-test", 0);
        let per_cluster = 6usize;
        let mut listings = Vec::new();
        let mut rows = BTreeMap::new();
        let mut outcomes = BTreeMap::new();
        for c in 0..12 {
            let cluster = format!("c{c:02}");
            let treated = c % 2 == 0;
            for l in 0..per_cluster {
                let id = format!("{cluster}_l{l}");
                let b = rng.random_range(0..9u64);
                listings.push(ListingRecord {
                    listing_id: id.clone(),
                    market_id: "m".into(),
                    eligible: true,
                    tenure_class: TenureClass::LongTenured,
                    pre_bookings: b,
                    pre_nights: rng.random_range(0..20),
                    pre_booking_value: rng.random_range(10.0..90.0),
                    pre_gross_spend: 0.0,
                    smart_pricing_on: false,
                    supply_elasticity_index: None,
                    demand_elasticity_index: None,
                });
                rows.insert(
                    id.clone(),
                    AssignmentRow {
                        cluster_id: cluster.clone(),
                        stratum_id: (c / 6) as u32,
                        meta_arm: MetaArm::ClusterRandomized,
                        treatment: treated,
                    },
                );
                let y = 1.0 + 0.3 * b as f64 - 0.4 * f64::from(treated)
                    + rng.random_range(-0.2..0.2);
                outcomes.insert(
                    id,
                    Outcome { bookings: 0, nights: 0, gross_spend: y },
                );
            }
        }
        let assignment = DesignAssignment { seed: 0, provenance: "test".into(), rows };
        let panel = OutcomePanel { outcomes };

        let weighted = cluster_aggregated_fit(
            &panel,
            &assignment,
            &listings,
            OutcomeKind::GrossSpend,
            RegressionCovariates::BookingsNightsValue,
        )
        .unwrap();

        // Unweighted regression on the same per-cluster means.
        let aggs = aggregate_cluster_arm(
            &panel,
            &assignment,
            &listings,
            OutcomeKind::GrossSpend,
            RegressionCovariates::BookingsNightsValue,
        )
        .unwrap();
        let mut data = RegressionData {
            unit_ids: Vec::new(),
            y: Vec::new(),
            treatment: Vec::new(),
            bernoulli: None,
            stratum: Vec::new(),
            covariates: Vec::new(),
            covariate_names: RegressionCovariates::BookingsNightsValue.names(),
            se_cluster: Vec::new(),
            weights: None,
        };
        for (cluster_id, agg) in &aggs {
            let n = agg.n as f64;
            data.unit_ids.push(cluster_id.clone());
            data.y.push(agg.y_sum / n);
            data.treatment.push(agg.treatment);
            data.stratum.push(agg.stratum);
            data.covariates.push(agg.cov_sums.iter().map(|s| s / n).collect());
            data.se_cluster.push(cluster_id.clone());
        }
        let unweighted = ols_fit(
            &data,
            FitOptions { kind: SpecKind::ArmLevel, fe: FeMode::Demeaned, se: SeMode::Robust },
        )
        .unwrap();

        let a = weighted.coefficient("treatment").unwrap();
        let b = unweighted.coefficient("treatment").unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    fn listing(id: &str, market: &str, supply: f64, demand: f64) -> ListingRecord {
        ListingRecord {
            listing_id: id.into(),
            market_id: market.into(),
            eligible: true,
            tenure_class: TenureClass::LongTenured,
            pre_bookings: 0,
            pre_nights: 0,
            pre_booking_value: 0.0,
            pre_gross_spend: 0.0,
            smart_pricing_on: false,
            supply_elasticity_index: Some(supply),
            demand_elasticity_index: Some(demand),
        }
    }

    #[test]
    fn uniform_markets_and_indices_keep_everyone() {
        let listings: Vec<_> = (0..6)
            .map(|i| listing(&format!("l{i}"), &format!("m{}", i % 3), 1.0, 1.0))
            .collect();
        let subset = constrained_subset(&listings, ConstraintKind::Supply).unwrap();
        assert_eq!(subset.len(), 6);
    }

    #[test]
    fn missing_index_fails_fast() {
        let mut listings = vec![listing("a", "m", 1.0, 1.0)];
        listings[0].demand_elasticity_index = None;
        assert!(matches!(
            constrained_subset(&listings, ConstraintKind::Demand),
            Err(Error::MissingIndex(id)) if id == "a"
        ));
        // The supply index is still present.
        assert!(constrained_subset(&listings, ConstraintKind::Supply).is_ok());
    }

    /// Brute-force sort-and-cut oracle on constructed data with known
    /// quantiles.
    #[test]
    fn matches_sort_and_cut_oracle() {
        // Markets: big (8 listings), mid (4), small (2). Indices rise with
        // listing number.
        let mut listings = Vec::new();
        let mut idx = 0;
        for (market, count) in [("big", 8usize), ("mid", 4), ("small", 2)] {
            for _ in 0..count {
                listings.push(listing(&format!("l{idx:02}"), market, idx as f64, 0.0));
                idx += 1;
            }
        }
        // Listing-level market sizes: eight 8s, four 4s, two 2s.
        // Sorted: [2,2,4,4,4,4,8,...]; median (rank 7 of 14) = 8.
        // So only "big" survives: listings l00..l07, indices 0..7.
        // 75th quantile of 8 values (rank 6) = 5; keep indices >= 5.
        let subset = constrained_subset(&listings, ConstraintKind::Supply).unwrap();
        let got: Vec<&str> = subset.iter().map(|l| l.listing_id.as_str()).collect();
        assert_eq!(got, vec!["l05", "l06", "l07"]);
    }

    /// Listing-weighted (not market-weighted) median: one huge market must
    /// dominate the cut.
    #[test]
    fn weighting_is_listing_level() {
        let mut listings = Vec::new();
        // 10 tiny markets of 1 listing, one market of 30 listings.
        for m in 0..10 {
            listings.push(listing(&format!("t{m}"), &format!("tiny{m}"), 1.0, 0.0));
        }
        for i in 0..30 {
            listings.push(listing(&format!("b{i:02}"), "big", 1.0, 0.0));
        }
        let subset = constrained_subset(&listings, ConstraintKind::Supply).unwrap();
        // Listing-weighted median size = 30 (30 of 40 listings sit in the
        // big market), so the tiny markets all drop. Market-weighted
        // median (size 1) would have kept them.
        assert!(subset.iter().all(|l| l.market_id == "big"));
        assert_eq!(subset.len(), 30);
    }
}
