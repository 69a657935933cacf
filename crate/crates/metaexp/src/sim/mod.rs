//! Marketplace simulator with buyer-side substitution.
//!
//! Guests consider the `k` nearest available listings to their query point
//! and choose among them (plus an outside option) by multinomial logit.
//! Treated listings carry a price multiplier; bookings consume capacity, so
//! a treated listing losing demand frees its competitors' capacity and
//! vice versa. That substitution channel violates SUTVA by construction,
//! while global counterfactuals with common random numbers provide the
//! exact ground-truth treatment effect the estimators are judged against.

mod metastudy;
mod outcomes;
mod world;

pub use metastudy::{
    run_meta_study, run_replication, summarize, EmbedConfigSnapshot, ReplicationRecord,
    StudyConfig, StudySummary,
};
pub use outcomes::{ground_truth, simulate_outcomes, simulate_with_sessions, GroundTruth, TreatmentRegime};
pub use world::{generate_world, SimWorld};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_listings: usize,
    pub n_markets: usize,
    pub latent_dim: usize,
    pub n_guests: usize,
    /// Consideration-set size: the k nearest available listings.
    pub consideration_k: usize,
    /// Price coefficient (gamma) in guest utility.
    pub price_sensitivity: f64,
    /// Guest-facing price multiplier for treated listings (1 + f).
    pub treatment_price_multiplier: f64,
    /// Lognormal base-price parameters.
    pub base_price_mu: f64,
    pub base_price_sigma: f64,
    /// Bookings a listing can absorb before leaving availability.
    /// `None` means unlimited.
    pub capacity_per_listing: Option<u32>,
    pub horizon_days: usize,
    /// Systematic utility of any inside option before the price term.
    pub base_utility: f64,
    /// Noise added to the sampled listing position when drawing guest
    /// query vectors.
    pub query_noise: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_listings: 2000,
            n_markets: 8,
            latent_dim: 8,
            n_guests: 20_000,
            consideration_k: 10,
            price_sensitivity: 1.0,
            treatment_price_multiplier: 1.2,
            base_price_mu: 0.0,
            base_price_sigma: 0.3,
            capacity_per_listing: Some(8),
            horizon_days: 7,
            base_utility: 2.0,
            query_noise: 0.25,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.consideration_k < 1 {
            return Err(Error::Domain("consideration_k must be >= 1".into()));
        }
        if self.n_listings < self.consideration_k {
            return Err(Error::Domain("n_listings must be >= consideration_k".into()));
        }
        if self.n_markets < 1 || self.latent_dim < 1 || self.horizon_days < 1 {
            return Err(Error::Domain("n_markets, latent_dim, horizon_days must be >= 1".into()));
        }
        if let Some(c) = self.capacity_per_listing {
            if c < 1 {
                return Err(Error::Domain("capacity_per_listing must be >= 1".into()));
            }
        }
        if !(self.price_sensitivity.is_finite() && self.price_sensitivity >= 0.0) {
            return Err(Error::Domain("price_sensitivity must be >= 0".into()));
        }
        if !(self.treatment_price_multiplier.is_finite() && self.treatment_price_multiplier > 0.0) {
            return Err(Error::Domain("treatment_price_multiplier must be > 0".into()));
        }
        if self.base_price_sigma < 0.0 || self.query_noise < 0.0
            || self.base_price_sigma.is_nan() || self.query_noise.is_nan()
        {
            return Err(Error::Domain("scale parameters must be >= 0".into()));
        }
        Ok(())
    }
}
