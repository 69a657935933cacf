//! Listing demand embeddings.
//!
//! Trains a skip-gram model over search-session co-view sequences with a
//! negative-sampling objective, where negatives for each training pair are
//! drawn from the center listing's market pool. The resulting per-listing
//! vectors place listings that compete for the same demand close together,
//! which is what downstream cluster randomization needs.

mod io;
mod loss;
mod train;
mod vocab;

pub use io::{export_embeddings_text, load_embeddings, save_embeddings};
pub use loss::{pair_loss, PairGradients};
pub use train::{train_embeddings, TrainReport};
pub use vocab::{build_vocab, Vocabulary};

use crate::error::{Error, Result};

/// Skip-gram training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    /// Embedding dimension.
    pub dim: usize,
    /// Context window half-width: positions j with 0 < |i-j| <= window_k
    /// are targets for center position i.
    pub window_k: usize,
    /// Negatives drawn per (center, context) pair.
    pub negatives_m: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Listings viewed fewer times than this are dropped from the vocabulary.
    pub min_count: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 16,
            window_k: 5,
            negatives_m: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
            min_count: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Domain("dim must be >= 1".into()));
        }
        if self.window_k < 1 {
            return Err(Error::Domain("window_k must be >= 1".into()));
        }
        if self.negatives_m < 1 {
            return Err(Error::Domain("negatives_m must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Domain("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Trained embeddings: an ordered vocabulary plus input (`w`) and output
/// (`v`) weight rows, `vocab.len() x dim` each, stored as f32 row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vocab: Vec<String>,
    pub dim: usize,
    pub w: Vec<f32>,
    pub v: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Input-embedding row for vocabulary index `i`. Input rows are "the"
    /// demand embedding used by downstream clustering.
    pub fn input_row(&self, i: usize) -> &[f32] {
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f32] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    /// Input row by listing id, if present.
    pub fn vector(&self, listing_id: &str) -> Option<&[f32]> {
        let idx = self.vocab.binary_search_by(|t| t.as_str().cmp(listing_id)).ok()?;
        Some(self.input_row(idx))
    }

    /// Per-listing input vectors widened to f64, in vocabulary order.
    pub fn input_rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| self.input_row(i).iter().map(|&x| f64::from(x)).collect())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vocab.len() * self.dim;
        if self.w.len() != n || self.v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.w.len() });
        }
        if self.w.iter().chain(self.v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite embedding entry".into()));
        }
        Ok(())
    }
}

/// Cosine similarity of two vectors; 0 when either norm vanishes.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += f64::from(x) * f64::from(y);
        na += f64::from(x) * f64::from(x);
        nb += f64::from(y) * f64::from(y);
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}
