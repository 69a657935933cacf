//! Vocabulary construction with per-market token pools.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::datamodel::{ListingRecord, SearchSession};
use crate::error::{Error, Result};

/// Deterministically ordered vocabulary over listing ids, partitioned into
/// per-market pools for market-level negative sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    /// Sorted listing ids; index into this vec is the token id.
    pub tokens: Vec<String>,
    /// View counts aligned with `tokens`.
    pub counts: Vec<u64>,
    /// Market of each token, aligned with `tokens`.
    pub markets: Vec<String>,
    /// market id -> token indices belonging to it (sorted). Pools partition
    /// the vocabulary.
    pub market_pools: BTreeMap<String, Vec<usize>>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, listing_id: &str) -> Option<usize> {
        self.tokens.binary_search_by(|t| t.as_str().cmp(listing_id)).ok()
    }
}

/// Builds the vocabulary from sessions and the listing dataset.
///
/// Every session listing must resolve against `listings`; listings viewed
/// fewer than `min_count` times are excluded. Tokens are sorted by id so the
/// result is independent of session order.
pub fn build_vocab(
    sessions: &[SearchSession],
    listings: &[ListingRecord],
    min_count: u64,
) -> Result<Vocabulary> {
    let market_of: HashMap<&str, &str> = listings
        .iter()
        .map(|l| (l.listing_id.as_str(), l.market_id.as_str()))
        .collect();
    let known: HashSet<&str> = market_of.keys().copied().collect();

    let mut views: HashMap<&str, u64> = HashMap::new();
    for session in sessions {
        session.check_resolvable(&known)?;
        for id in &session.listings_viewed {
            *views.entry(id.as_str()).or_insert(0) += 1;
        }
    }

    let mut kept: Vec<(&str, u64)> = views
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    kept.sort_unstable_by(|a, b| a.0.cmp(b.0));

    let tokens: Vec<String> = kept.iter().map(|(id, _)| id.to_string()).collect();
    let counts: Vec<u64> = kept.iter().map(|(_, c)| *c).collect();
    let markets: Vec<String> = kept
        .iter()
        .map(|(id, _)| {
            market_of
                .get(id)
                .map(|m| m.to_string())
                .ok_or_else(|| Error::UnknownListing(id.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut market_pools: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, market) in markets.iter().enumerate() {
        market_pools.entry(market.clone()).or_default().push(idx);
    }

    Ok(Vocabulary { tokens, counts, markets, market_pools })
}
