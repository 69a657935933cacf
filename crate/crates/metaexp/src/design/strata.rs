//! Mahalanobis distances and optimal-greedy stratification.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::covariates::ClusterCovariates;
use crate::error::{Error, Result};

/// Ridge added to the covariance before inversion; standardized covariates
/// can be collinear in small designs.
const COVARIANCE_RIDGE: f64 = 1e-8;

/// Symmetric pairwise distance matrix over clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub cluster_ids: Vec<String>,
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Builds directly from a full row-major matrix (used by tests and by
    /// callers with precomputed distances).
    pub fn from_dense(cluster_ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let n = cluster_ids.len();
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(DistanceMatrix { cluster_ids, n, data })
    }
}

/// Pairwise Mahalanobis distances between clusters after centering and
/// scaling every covariate to mean 0, sd 1. The scatter matrix is the
/// sample covariance of the standardized covariates plus a small ridge, so
/// rank-deficient designs fall back gracefully instead of erroring.
pub fn mahalanobis_matrix(covariates: &ClusterCovariates) -> Result<DistanceMatrix> {
    let n = covariates.len();
    if n < 2 {
        return Err(Error::TooFewClusters { needed: 2, got: n });
    }
    let k = covariates.names.len();

    // Standardize columns.
    let mut standardized = vec![0.0f64; n * k];
    for col in 0..k {
        let mean = covariates.values.iter().map(|row| row[col]).sum::<f64>() / n as f64;
        let var = covariates
            .values
            .iter()
            .map(|row| (row[col] - mean).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let sd = var.sqrt();
        for (row_idx, row) in covariates.values.iter().enumerate() {
            standardized[row_idx * k + col] =
                if sd > 0.0 { (row[col] - mean) / sd } else { 0.0 };
        }
    }

    // Sample covariance of the standardized columns (denominator n-1),
    // ridged for invertibility.
    let z = DMatrix::from_row_slice(n, k, &standardized);
    let mut s = (z.transpose() * &z) / (n as f64 - 1.0);
    for d in 0..k {
        s[(d, d)] += COVARIANCE_RIDGE;
    }
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Domain("covariance not invertible even with ridge".into()))?;

    let mut data = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let zi = z.row(i);
            let zj = z.row(j);
            let diff = zi - zj;
            let d2 = (&diff * &s_inv * diff.transpose())[(0, 0)];
            let d = d2.max(0.0).sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }

    Ok(DistanceMatrix { cluster_ids: covariates.cluster_ids.clone(), n, data })
}

/// Strata of fixed size plus the clusters left over when the count does not
/// divide evenly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedDesign {
    /// Each stratum is an ordered list of exactly `stratum_size` cluster ids.
    pub strata: Vec<Vec<String>>,
    pub excluded: Vec<String>,
    pub stratum_size: usize,
}

impl StratifiedDesign {
    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }
}

/// Greedy stratification: repeatedly seed a stratum with the globally
/// smallest available pair, then grow it by adding the available cluster
/// with the smallest mean distance to the current members. A pair is
/// available while neither endpoint has been placed.
pub fn build_strata(distances: &DistanceMatrix, stratum_size: usize) -> Result<StratifiedDesign> {
    let n = distances.len();
    if stratum_size < 2 {
        return Err(Error::Domain("stratum_size must be >= 2".into()));
    }
    if n < stratum_size {
        return Err(Error::TooFewClusters { needed: stratum_size, got: n });
    }

    let mut available = vec![true; n];
    let mut remaining = n;
    let mut strata = Vec::new();

    while remaining >= stratum_size {
        // Seed pair: smallest available distance, ties to the smallest
        // (i, j) index pair.
        let mut seed: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| available[i]) {
            for j in (i + 1..n).filter(|&j| available[j]) {
                let d = distances.get(i, j);
                if seed.is_none_or(|(best, _, _)| d < best) {
                    seed = Some((d, i, j));
                }
            }
        }
        let (_, a, b) = seed.expect("at least stratum_size clusters available");
        let mut members = vec![a, b];
        available[a] = false;
        available[b] = false;

        while members.len() < stratum_size {
            let mut next: Option<(f64, usize)> = None;
            for candidate in (0..n).filter(|&c| available[c]) {
                let mean_d = members
                    .iter()
                    .map(|&m| distances.get(candidate, m))
                    .sum::<f64>()
                    / members.len() as f64;
                if next.is_none_or(|(best, _)| mean_d < best) {
                    next = Some((mean_d, candidate));
                }
            }
            let (_, chosen) = next.expect("available clusters remain");
            members.push(chosen);
            available[chosen] = false;
        }
        remaining -= stratum_size;
        strata
            .push(members.into_iter().map(|i| distances.cluster_ids[i].clone()).collect());
    }

    let excluded: Vec<String> = (0..n)
        .filter(|&i| available[i])
        .map(|i| distances.cluster_ids[i].clone())
        .collect();
    if !excluded.is_empty() {
        log::warn!(
            "stratification excluded {} cluster(s) not filling a stratum of {}: {:?}",
            excluded.len(),
            stratum_size,
            excluded
        );
    }

    Ok(StratifiedDesign { strata, excluded, stratum_size })
}
