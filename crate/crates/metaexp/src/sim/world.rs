//! World generation: listings, markets, prices and the guest stream.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use super::SimConfig;
use crate::datamodel::{ListingRecord, OutcomePanel, TenureClass};
use crate::error::Result;
use crate::seeds;

const MARKET_SPREAD: f64 = 3.0;
const LISTING_SPREAD: f64 = 0.5;

/// A fully materialized simulated marketplace. Regenerating with the same
/// config is bit-identical; guest utility shocks are keyed lazily off
/// `guest_stream` so counterfactuals replay the exact same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub config: SimConfig,
    pub listing_ids: Vec<String>,
    pub market_ids: Vec<String>,
    /// Market index per listing.
    pub market_of: Vec<usize>,
    /// Latent position per listing.
    pub latents: Vec<Vec<f64>>,
    pub base_prices: Vec<f64>,
    pub guest_queries: Vec<Vec<f64>>,
    /// Nights requested per guest (enters spend).
    pub guest_nights: Vec<u32>,
    /// Arrival day per guest.
    pub guest_days: Vec<u32>,
    /// Sub-seed keying this world's guest stream and its utility shocks.
    pub guest_stream: u64,
}

/// Generates a world from the config.
pub fn generate_world(config: &SimConfig) -> Result<SimWorld> {
    config.validate()?;
    let n = config.n_listings;
    let dim = config.latent_dim;
    let seed = config.seed;

    let mut market_rng = seeds::rng(seed, "sim-markets", 0);
    let centroids: Vec<Vec<f64>> = (0..config.n_markets)
        .map(|_| {
            (0..dim)
                .map(|_| MARKET_SPREAD * market_rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let mut listing_rng = seeds::rng(seed, "sim-listings", 0);
    let mut market_of = Vec::with_capacity(n);
    let mut latents = Vec::with_capacity(n);
    for i in 0..n {
        let m = i % config.n_markets;
        market_of.push(m);
        latents.push(
            centroids[m]
                .iter()
                .map(|&c| c + LISTING_SPREAD * listing_rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }

    let price_dist = LogNormal::new(config.base_price_mu, config.base_price_sigma)
        .expect("validated sigma");
    let mut price_rng = seeds::rng(seed, "sim-prices", 0);
    let base_prices: Vec<f64> = (0..n).map(|_| price_dist.sample(&mut price_rng)).collect();

    let guest_stream = seeds::derive(seed, "guests", 0);
    let world = SimWorld {
        listing_ids: (0..n).map(|i| format!("L{i:06}")).collect(),
        market_ids: (0..config.n_markets).map(|m| format!("M{m:03}")).collect(),
        market_of,
        latents,
        base_prices,
        guest_queries: Vec::new(),
        guest_nights: Vec::new(),
        guest_days: Vec::new(),
        guest_stream,
        config: config.clone(),
    };
    Ok(populate_guests(world, guest_stream))
}

fn populate_guests(mut world: SimWorld, guest_stream: u64) -> SimWorld {
    let config = &world.config;
    let n_guests = config.n_guests;
    let mut rng = seeds::rng(guest_stream, "sim-guest-draws", 0);
    let mut queries = Vec::with_capacity(n_guests);
    let mut nights = Vec::with_capacity(n_guests);
    let mut days = Vec::with_capacity(n_guests);
    for g in 0..n_guests {
        // Query vectors are draws from the listing mixture plus noise.
        let anchor = rng.random_range(0..config.n_listings);
        let q: Vec<f64> = world.latents[anchor]
            .iter()
            .map(|&x| x + config.query_noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        queries.push(q);
        nights.push(rng.random_range(1..=7u32));
        days.push((g * config.horizon_days / n_guests.max(1)) as u32);
    }
    world.guest_queries = queries;
    world.guest_nights = nights;
    world.guest_days = days;
    world.guest_stream = guest_stream;
    world
}

impl SimWorld {
    pub fn n_listings(&self) -> usize {
        self.listing_ids.len()
    }

    /// Same listings and prices, fresh guest stream: used to produce
    /// pre-treatment outcomes that are independent of the experiment
    /// window's draws.
    pub fn pre_period_variant(&self) -> SimWorld {
        let stream = seeds::derive(self.config.seed, "guests-pre", 0);
        populate_guests(self.clone(), stream)
    }

    /// Gumbel utility shock for (guest, listing), fixed across
    /// counterfactuals.
    pub(crate) fn shock(&self, guest: usize, listing: usize) -> f64 {
        gumbel(seeds::unit_from_key(self.guest_stream, "shock", guest as u64, listing as u64))
    }

    /// Outside-option shock for a guest.
    pub(crate) fn outside_shock(&self, guest: usize) -> f64 {
        gumbel(seeds::unit_from_key(self.guest_stream, "shock", guest as u64, u64::MAX))
    }

    /// Listing dataset view of this world, with pre-treatment covariates
    /// taken from the given panel. Listings absent from `clustered` (when
    /// provided) are marked ineligible.
    pub fn to_listing_records(
        &self,
        pre: &OutcomePanel,
        eligible: impl Fn(&str) -> bool,
    ) -> Vec<ListingRecord> {
        self.listing_ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let outcome = pre.get(id).copied().unwrap_or_default();
                ListingRecord {
                    listing_id: id.clone(),
                    market_id: self.market_ids[self.market_of[i]].clone(),
                    eligible: eligible(id),
                    tenure_class: TenureClass::LongTenured,
                    pre_bookings: outcome.bookings,
                    pre_nights: outcome.nights,
                    pre_booking_value: outcome.gross_spend,
                    pre_gross_spend: outcome.gross_spend,
                    smart_pricing_on: false,
                    supply_elasticity_index: None,
                    demand_elasticity_index: None,
                }
            })
            .collect()
    }
}

pub(crate) fn gumbel(u: f64) -> f64 {
    -(-u.ln()).ln()
}
