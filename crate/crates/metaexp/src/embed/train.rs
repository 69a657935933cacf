//! Skip-gram SGD training loop.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::loss::pair_loss;
use super::vocab::{build_vocab, Vocabulary};
use super::{EmbedConfig, EmbeddingMatrix};
use crate::datamodel::{ListingRecord, SearchSession};
use crate::error::{Error, Result};
use crate::seeds;

/// Diagnostics emitted by a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Mean pair loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Skip-gram pairs per epoch.
    pub pairs_per_epoch: u64,
    /// Total negative draws.
    pub negative_draws: u64,
    /// Negative draws whose market differed from the center's market.
    /// Zero unless pool fallback was triggered.
    pub cross_market_draws: u64,
    /// Draws that fell back to the global pool because the center's market
    /// pool was too small.
    pub global_fallback_draws: u64,
    pub warnings: Vec<String>,
}

/// Weight storage shared across training workers. Updates are plain
/// read-modify-write on relaxed atomics: racy across workers by contract,
/// exact when a single worker runs.
struct SharedWeights {
    data: Vec<AtomicU32>,
    dim: usize,
}

impl SharedWeights {
    fn from_f32(values: Vec<f32>, dim: usize) -> Self {
        let data = values.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        SharedWeights { data, dim }
    }

    fn into_f32(self) -> Vec<f32> {
        self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }

    fn read_row(&self, row: usize, buf: &mut [f64]) {
        let base = row * self.dim;
        for (d, slot) in buf.iter_mut().enumerate() {
            *slot = f64::from(f32::from_bits(self.data[base + d].load(Ordering::Relaxed)));
        }
    }

    fn add_scaled(&self, row: usize, delta: &[f64], scale: f64) {
        let base = row * self.dim;
        for (d, &g) in delta.iter().enumerate() {
            let cell = &self.data[base + d];
            let cur = f32::from_bits(cell.load(Ordering::Relaxed));
            let next = (f64::from(cur) + scale * g) as f32;
            cell.store(next.to_bits(), Ordering::Relaxed);
        }
    }
}

/// One worker's share of an epoch: trains in place, returns (loss sum, pair
/// count, negative-draw tallies).
struct WorkerTally {
    loss_sum: f64,
    pairs: u64,
    negative_draws: u64,
    cross_market: u64,
    fallback: u64,
}

fn draw_negatives(
    rng: &mut ChaCha12Rng,
    vocab: &Vocabulary,
    center: usize,
    context: usize,
    m: usize,
    out: &mut Vec<usize>,
    tally: &mut WorkerTally,
) {
    out.clear();
    let market = &vocab.markets[center];
    let pool = &vocab.market_pools[market];
    let use_global = pool.len() < m + 1;
    let n_global = vocab.len();
    if use_global && n_global < 2 {
        return; // no candidate distinct from the pair exists
    }
    let center_market = market.as_str();
    for _ in 0..m {
        // Bounded rejection of the pair's own tokens.
        for _attempt in 0..64 {
            let candidate = if use_global {
                rng.random_range(0..n_global)
            } else {
                pool[rng.random_range(0..pool.len())]
            };
            if candidate == context || candidate == center {
                continue;
            }
            tally.negative_draws += 1;
            if use_global {
                tally.fallback += 1;
            }
            if vocab.markets[candidate] != center_market {
                tally.cross_market += 1;
            }
            out.push(candidate);
            break;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_worker(
    sessions: &[Vec<usize>],
    vocab: &Vocabulary,
    w: &SharedWeights,
    v: &SharedWeights,
    config: &EmbedConfig,
    pair_counter: &AtomicU64,
    total_pairs: u64,
    mut rng: ChaCha12Rng,
) -> WorkerTally {
    let dim = config.dim;
    let mut tally =
        WorkerTally { loss_sum: 0.0, pairs: 0, negative_draws: 0, cross_market: 0, fallback: 0 };
    let mut center_buf = vec![0.0f64; dim];
    let mut context_buf = vec![0.0f64; dim];
    let mut neg_idx: Vec<usize> = Vec::with_capacity(config.negatives_m);
    let mut neg_bufs: Vec<Vec<f64>> = vec![vec![0.0f64; dim]; config.negatives_m];

    let lr0 = config.learning_rate;
    for session in sessions {
        let n = session.len();
        for i in 0..n {
            let center = session[i];
            let lo = i.saturating_sub(config.window_k);
            let hi = (i + config.window_k).min(n - 1);
            for (j, &context) in session.iter().enumerate().take(hi + 1).skip(lo) {
                if j == i {
                    continue;
                }
                let t = pair_counter.fetch_add(1, Ordering::Relaxed);
                let progress = t as f64 / total_pairs.max(1) as f64;
                let lr = lr0 * (1.0 - 0.9 * progress).max(0.1);

                draw_negatives(
                    &mut rng,
                    vocab,
                    center,
                    context,
                    config.negatives_m,
                    &mut neg_idx,
                    &mut tally,
                );

                w.read_row(center, &mut center_buf);
                v.read_row(context, &mut context_buf);
                for (k, &ni) in neg_idx.iter().enumerate() {
                    v.read_row(ni, &mut neg_bufs[k]);
                }
                let neg_refs: Vec<&[f64]> =
                    neg_bufs[..neg_idx.len()].iter().map(|b| b.as_slice()).collect();
                let (loss, grads) =
                    pair_loss(&center_buf, &context_buf, &neg_refs).expect("dims match");

                w.add_scaled(center, &grads.center, -lr);
                v.add_scaled(context, &grads.context, -lr);
                for (k, &ni) in neg_idx.iter().enumerate() {
                    v.add_scaled(ni, &grads.negatives[k], -lr);
                }

                tally.loss_sum += loss;
                tally.pairs += 1;
            }
        }
    }
    tally
}

/// Trains listing embeddings on search sessions.
///
/// Deterministic given identical inputs, config and `workers == 1`. With
/// more workers, sessions are sharded and gradient application is
/// best-effort lock-free, so results depend on scheduling.
pub fn train_embeddings(
    sessions: &[SearchSession],
    listings: &[ListingRecord],
    config: &EmbedConfig,
    workers: usize,
) -> Result<(EmbeddingMatrix, TrainReport)> {
    config.validate()?;
    if workers == 0 {
        return Err(Error::Domain("workers must be >= 1".into()));
    }
    if sessions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = build_vocab(sessions, listings, config.min_count)?;
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let dim = config.dim;
    let n = vocab.len();

    let mut init_rng = seeds::rng(config.seed, "embed-init", 0);
    let bound = 0.5 / dim as f64;
    let w_init: Vec<f32> =
        (0..n * dim).map(|_| init_rng.random_range(-bound..bound) as f32).collect();
    let v_init = vec![0.0f32; n * dim];

    // Resolve sessions to token indices, dropping tokens filtered by
    // min_count and windowing over the compacted sequence.
    let indexed: Vec<Vec<usize>> = sessions
        .iter()
        .map(|s| s.listings_viewed.iter().filter_map(|id| vocab.index_of(id)).collect())
        .collect();

    let pairs_per_epoch: u64 = indexed
        .iter()
        .map(|s| {
            let n = s.len();
            (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(config.window_k);
                    let hi = (i + config.window_k).min(n.saturating_sub(1));
                    (hi - lo) as u64
                })
                .sum::<u64>()
        })
        .sum();

    let mut report = TrainReport { pairs_per_epoch, ..TrainReport::default() };

    if pairs_per_epoch == 0 {
        report.warnings.push(
            "no skip-gram pairs could be formed; returning initialized embeddings".to_string(),
        );
        log::warn!("embed: no training pairs, embeddings left at initialization");
        let matrix = EmbeddingMatrix { vocab: vocab.tokens, dim, w: w_init, v: v_init };
        return Ok((matrix, report));
    }

    let w = SharedWeights::from_f32(w_init, dim);
    let v = SharedWeights::from_f32(v_init, dim);
    let total_pairs = pairs_per_epoch * config.epochs as u64;
    let pair_counter = AtomicU64::new(0);

    let chunk = indexed.len().div_ceil(workers);
    for _epoch in 0..config.epochs {
        let tallies: Vec<WorkerTally> = std::thread::scope(|scope| {
            let handles: Vec<_> = indexed
                .chunks(chunk)
                .enumerate()
                .map(|(widx, shard)| {
                    // Re-seeded identically every epoch: each pair keeps
                    // the same negatives across epochs, so the per-epoch
                    // objective is a fixed function and epoch losses
                    // descend instead of wiggling around resampling noise.
                    let rng = seeds::rng(config.seed, "embed-train", widx as u64);
                    let w = &w;
                    let v = &v;
                    let vocab = &vocab;
                    let pair_counter = &pair_counter;
                    scope.spawn(move || {
                        run_worker(shard, vocab, w, v, config, pair_counter, total_pairs, rng)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });

        let loss_sum: f64 = tallies.iter().map(|t| t.loss_sum).sum();
        let pairs: u64 = tallies.iter().map(|t| t.pairs).sum();
        report.epoch_losses.push(loss_sum / pairs.max(1) as f64);
        for t in &tallies {
            report.negative_draws += t.negative_draws;
            report.cross_market_draws += t.cross_market;
            report.global_fallback_draws += t.fallback;
        }
    }

    let matrix = EmbeddingMatrix { vocab: vocab.tokens, dim, w: w.into_f32(), v: v.into_f32() };
    matrix.validate()?;
    Ok((matrix, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::TenureClass;
    use crate::embed::cosine;

    fn listing(id: &str, market: &str) -> ListingRecord {
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
            supply_elasticity_index: None,
            demand_elasticity_index: None,
        }
    }

    fn session(user: &str, ids: &[String]) -> SearchSession {
        SearchSession {
            user_id: user.into(),
            listings_viewed: ids.to_vec(),
            booked: false,
        }
    }

    /// Two 10-listing cliques co-viewed only internally separate in
    /// embedding space.
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn cliques_separate() {
        let clique_a: Vec<String> = (0..10).map(|i| format!("a{i}")).collect();
        let clique_b: Vec<String> = (0..10).map(|i| format!("b{i}")).collect();
        let mut listings = Vec::new();
        for id in clique_a.iter().chain(clique_b.iter()) {
            listings.push(listing(id, "m"));
        }
        let mut sessions = Vec::new();
        for round in 0..20 {
            for clique in [&clique_a, &clique_b] {
                let mut ids = clique.clone();
                let n = ids.len();
                ids.rotate_left(round % n);
                sessions.push(session(&format!("u{round}"), &ids));
            }
        }
        let config = EmbedConfig { dim: 4, epochs: 50, seed: 11, ..EmbedConfig::default() };
        let (matrix, report) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        assert!(report.warnings.is_empty());

        let vec_of = |id: &str| matrix.vector(id).unwrap().to_vec();
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..10 {
            for j in (i + 1)..10 {
                intra.push(cosine(&vec_of(&clique_a[i]), &vec_of(&clique_a[j])));
                intra.push(cosine(&vec_of(&clique_b[i]), &vec_of(&clique_b[j])));
            }
            for j in 0..10 {
                inter.push(cosine(&vec_of(&clique_a[i]), &vec_of(&clique_b[j])));
            }
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(
            mean(&intra) > mean(&inter),
            "intra {} <= inter {}",
            mean(&intra),
            mean(&inter)
        );
    }

    #[test]
    fn single_token_session_returns_init_with_warning() {
        let listings = vec![listing("a", "m")];
        let sessions = vec![session("u", &["a".to_string()])];
        let config = EmbedConfig { dim: 4, epochs: 3, seed: 1, ..EmbedConfig::default() };
        let (matrix, report) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        assert_eq!(report.pairs_per_epoch, 0);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.epoch_losses.is_empty());
        // Output rows untouched at initialization.
        assert!(matrix.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn same_seed_bit_identical() {
        let listings: Vec<_> = (0..6).map(|i| listing(&format!("l{i}"), "m")).collect();
        let ids: Vec<String> = listings.iter().map(|l| l.listing_id.clone()).collect();
        let sessions: Vec<_> = (0..10).map(|u| session(&format!("u{u}"), &ids)).collect();
        let config = EmbedConfig { dim: 8, epochs: 4, seed: 5, ..EmbedConfig::default() };
        let (m1, _) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        let (m2, _) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        assert_eq!(m1, m2);
        let other = EmbedConfig { seed: 6, ..config };
        let (m3, _) = train_embeddings(&sessions, &listings, &other, 1).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn epoch_loss_mostly_non_increasing() {
        let listings: Vec<_> = (0..12).map(|i| listing(&format!("l{i}"), "m")).collect();
        let ids: Vec<String> = listings.iter().map(|l| l.listing_id.clone()).collect();
        let mut sessions = Vec::new();
        for u in 0..15 {
            let mut s = ids.clone();
            let n = s.len();
            s.rotate_left(u % n);
            sessions.push(session(&format!("u{u}"), &s));
        }
        let config = EmbedConfig { dim: 8, epochs: 20, seed: 3, ..EmbedConfig::default() };
        let (_, report) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        let losses = &report.epoch_losses;
        let increases = losses.windows(2).filter(|w| w[1] > w[0]).count();
        let comparisons = losses.len() - 1;
        assert!(
            increases as f64 <= 0.05 * comparisons as f64,
            "{increases} increases out of {comparisons}: {losses:?}"
        );
    }

    /// Negatives come only from the center's market pool when pools are
    /// large enough.
    #[test]
    fn negatives_stay_in_market_pool() {
        let mut listings = Vec::new();
        let mut ids_a = Vec::new();
        let mut ids_b = Vec::new();
        for i in 0..10 {
            let a = format!("a{i}");
            let b = format!("b{i}");
            listings.push(listing(&a, "A"));
            listings.push(listing(&b, "B"));
            ids_a.push(a);
            ids_b.push(b);
        }
        let sessions = vec![session("u1", &ids_a), session("u2", &ids_b)];
        let config = EmbedConfig { dim: 4, epochs: 2, seed: 9, ..EmbedConfig::default() };
        let (_, report) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        assert!(report.negative_draws > 0);
        assert_eq!(report.cross_market_draws, 0);
        assert_eq!(report.global_fallback_draws, 0);
    }

    /// A market pool smaller than negatives_m + 1 falls back to the global
    /// pool instead of rejecting forever.
    #[test]
    fn tiny_market_falls_back_to_global_pool() {
        let mut listings = vec![listing("solo", "TINY")];
        let mut big = Vec::new();
        for i in 0..10 {
            let id = format!("big{i}");
            listings.push(listing(&id, "BIG"));
            big.push(id);
        }
        let mut viewed = vec!["solo".to_string()];
        viewed.extend(big.clone());
        let sessions = vec![session("u", &viewed)];
        let config = EmbedConfig { dim: 4, epochs: 1, seed: 2, ..EmbedConfig::default() };
        let (_, report) = train_embeddings(&sessions, &listings, &config, 1).unwrap();
        assert!(report.global_fallback_draws > 0);
    }

    #[test]
    fn empty_corpus_rejected() {
        let listings = vec![listing("a", "m")];
        let err = train_embeddings(&[], &listings, &EmbedConfig::default(), 1).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    /// Sharded training completes and produces a usable matrix. No
    /// determinism claim: lock-free updates race by contract.
    #[test]
    fn multi_worker_training_runs() {
        let listings: Vec<_> = (0..10).map(|i| listing(&format!("l{i}"), "m")).collect();
        let ids: Vec<String> = listings.iter().map(|l| l.listing_id.clone()).collect();
        let sessions: Vec<_> = (0..12).map(|u| session(&format!("u{u}"), &ids)).collect();
        let config = EmbedConfig { dim: 4, epochs: 3, seed: 8, ..EmbedConfig::default() };
        let (matrix, report) = train_embeddings(&sessions, &listings, &config, 3).unwrap();
        matrix.validate().unwrap();
        assert_eq!(report.epoch_losses.len(), 3);
        assert!(report.epoch_losses.iter().all(|l| l.is_finite()));
    }
}
