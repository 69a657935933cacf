//! (Weighted) least squares with stratum fixed effects and robust or
//! cluster-robust covariance.
//!
//! Fixed effects are absorbed by within-stratum demeaning; an explicit
//! dummy-encoded path exists for small instances and is contract-tested to
//! agree with the demeaned path. Covariances are sandwich estimators: HC1
//! when errors are treated as independent, CR1 when clustered.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::RegressionData;
use super::stats::two_sided_p;
use crate::error::{Error, Result};

/// Which regression specification to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    /// Outcome on treatment, stratum effects and covariates, within one arm.
    #[default]
    ArmLevel,
    /// Adds the Bernoulli-arm indicator and its treatment interaction.
    Joint,
}

/// How stratum fixed effects enter the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeMode {
    #[default]
    Demeaned,
    Dummies,
}

/// Covariance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMode {
    /// Heteroskedasticity-robust (HC1).
    #[default]
    Robust,
    /// Cluster-robust (CR1) at the dataset's `se_cluster` ids.
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub kind: SpecKind,
    pub fe: FeMode,
    pub se: SeMode,
}

/// Everything needed to recompute sandwiches after the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInternals {
    /// Design columns as used in the solve (demeaned terms, or intercept +
    /// dummies + terms in dummy mode).
    cols: Vec<Vec<f64>>,
    /// Positions of the named terms within `cols`.
    term_slots: Vec<usize>,
    residuals: Vec<f64>,
    weights: Vec<f64>,
    bread: DMatrix<f64>,
    k_total: usize,
}

#[cfg(test)]
impl FitInternals {
    pub(crate) fn residual_scale_for_tests(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// X'We per design column, for orthogonality checks.
    pub(crate) fn design_residual_dots_for_tests(&self) -> Vec<(usize, f64)> {
        self.cols
            .iter()
            .enumerate()
            .map(|(c, col)| (c, weighted_dot(&self.weights, col, &self.residuals)))
            .collect()
    }
}

/// A fitted regression: named coefficients, their covariance, absorbed
/// stratum effects and fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Named inference terms (treatment, arm indicator, interaction,
    /// covariates). Stratum effects and the intercept are reported
    /// separately.
    pub terms: Vec<String>,
    pub coef: Vec<f64>,
    /// Covariance over `terms`.
    pub vcov: Vec<Vec<f64>>,
    /// Fitted level of the reference (lowest-id) stratum.
    pub intercept: f64,
    /// Stratum levels relative to the reference stratum.
    pub stratum_effects: BTreeMap<u32, f64>,
    pub n_obs: usize,
    /// Total parameters including absorbed fixed effects.
    pub k_params: usize,
    pub n_strata: usize,
    /// Number of error clusters when clustered SEs were used.
    pub n_se_clusters: Option<usize>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub weighted: bool,
    pub spec: SpecKind,
    pub se_mode: SeMode,
    /// Outcome label for report rendering.
    pub outcome: String,
    #[serde(skip)]
    pub(crate) internals: Option<FitInternals>,
}

impl RegressionFit {
    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.coef[i])
    }

    pub fn se(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.vcov[i][i].max(0.0).sqrt())
    }

    pub fn z(&self, term: &str) -> Option<f64> {
        let i = self.index_of(term)?;
        let se = self.vcov[i][i].max(0.0).sqrt();
        Some(self.coef[i] / se)
    }

    pub fn p_value(&self, term: &str) -> Option<f64> {
        self.z(term).map(two_sided_p)
    }

    /// Symmetry and positive semi-definiteness of the covariance
    /// (eigenvalues above -1e-10 relative to the largest).
    pub fn check_vcov(&self) -> Result<()> {
        let k = self.terms.len();
        for i in 0..k {
            for j in 0..k {
                if (self.vcov[i][j] - self.vcov[j][i]).abs() > 1e-8 * self.vcov[i][i].abs().max(1.0)
                {
                    return Err(Error::Domain("covariance not symmetric".into()));
                }
            }
        }
        let m = DMatrix::from_fn(k, k, |i, j| 0.5 * (self.vcov[i][j] + self.vcov[j][i]));
        let eig = m.symmetric_eigenvalues();
        let scale = eig.iter().cloned().fold(1.0f64, f64::max);
        if eig.iter().any(|&e| e < -1e-10 * scale) {
            return Err(Error::Domain("covariance not positive semi-definite".into()));
        }
        Ok(())
    }
}

const TERM_TREATMENT: &str = "treatment";
const TERM_BERNOULLI: &str = "bernoulli";
const TERM_INTERACTION: &str = "bernoulli_x_treatment";

pub(crate) fn term_names(kind: SpecKind, covariate_names: &[String]) -> Vec<String> {
    let mut terms = vec![TERM_TREATMENT.to_string()];
    if kind == SpecKind::Joint {
        terms.push(TERM_BERNOULLI.to_string());
        terms.push(TERM_INTERACTION.to_string());
    }
    terms.extend(covariate_names.iter().cloned());
    terms
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((&w, &x), &y)| w * x * y).sum()
}

/// Names the first column that is (numerically) in the span of its
/// predecessors, via weighted modified Gram-Schmidt.
fn rank_check(cols: &[Vec<f64>], w: &[f64], names: &[String]) -> Result<()> {
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for (c, col) in cols.iter().enumerate() {
        let mut r = col.clone();
        for o in &ortho {
            let denom = weighted_dot(w, o, o);
            if denom <= 0.0 {
                continue;
            }
            let proj = weighted_dot(w, &r, o) / denom;
            for (ri, oi) in r.iter_mut().zip(o) {
                *ri -= proj * oi;
            }
        }
        let orig = weighted_dot(w, col, col).sqrt();
        let rem = weighted_dot(w, &r, &r).sqrt();
        if rem <= 1e-9 * orig.max(1e-12) {
            return Err(Error::RankDeficient(names[c].clone()));
        }
        ortho.push(r);
    }
    Ok(())
}

struct StratumIndex {
    /// stratum id -> row indices.
    groups: BTreeMap<u32, Vec<usize>>,
}

impl StratumIndex {
    fn new(stratum: &[u32]) -> Self {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &s) in stratum.iter().enumerate() {
            groups.entry(s).or_default().push(i);
        }
        StratumIndex { groups }
    }

    fn weighted_means(&self, values: &[f64], w: &[f64]) -> BTreeMap<u32, f64> {
        self.groups
            .iter()
            .map(|(&s, rows)| {
                let wsum: f64 = rows.iter().map(|&i| w[i]).sum();
                let vsum: f64 = rows.iter().map(|&i| w[i] * values[i]).sum();
                (s, vsum / wsum)
            })
            .collect()
    }
}

/// Fits the requested specification by weighted least squares.
pub fn ols_fit(data: &RegressionData, opts: FitOptions) -> Result<RegressionFit> {
    data.validate()?;
    let n = data.n();
    let weights: Vec<f64> = data.weights.clone().unwrap_or_else(|| vec![1.0; n]);

    // Raw term columns.
    let mut raw_cols: Vec<Vec<f64>> = vec![data.treatment.clone()];
    if opts.kind == SpecKind::Joint {
        let bern = data
            .bernoulli
            .as_ref()
            .ok_or_else(|| Error::Domain("joint spec requires the bernoulli indicator".into()))?;
        raw_cols.push(bern.clone());
        raw_cols.push(bern.iter().zip(&data.treatment).map(|(&m, &t)| m * t).collect());
    }
    let k_cov = data.covariate_names.len();
    for c in 0..k_cov {
        raw_cols.push(data.covariates.iter().map(|row| row[c]).collect());
    }
    let terms = term_names(opts.kind, &data.covariate_names);
    let k = terms.len();

    let strata = StratumIndex::new(&data.stratum);
    let n_strata = strata.groups.len();
    let k_total = k + n_strata;
    if n <= k_total {
        return Err(Error::Domain(format!(
            "need more observations ({n}) than parameters ({k_total})"
        )));
    }

    match opts.fe {
        FeMode::Demeaned => {
            fit_demeaned(data, opts, raw_cols, terms, weights, strata, k, k_total)
        }
        FeMode::Dummies => {
            fit_dummies(data, opts, raw_cols, terms, weights, strata, k, k_total)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_demeaned(
    data: &RegressionData,
    opts: FitOptions,
    raw_cols: Vec<Vec<f64>>,
    terms: Vec<String>,
    weights: Vec<f64>,
    strata: StratumIndex,
    k: usize,
    k_total: usize,
) -> Result<RegressionFit> {
    let n = data.n();

    let y_means = strata.weighted_means(&data.y, &weights);
    let mut y_dm = data.y.clone();
    for (i, v) in y_dm.iter_mut().enumerate() {
        *v -= y_means[&data.stratum[i]];
    }

    let mut col_means: Vec<BTreeMap<u32, f64>> = Vec::with_capacity(k);
    let mut cols_dm: Vec<Vec<f64>> = Vec::with_capacity(k);
    for col in &raw_cols {
        let means = strata.weighted_means(col, &weights);
        let mut dm = col.clone();
        for (i, v) in dm.iter_mut().enumerate() {
            *v -= means[&data.stratum[i]];
        }
        col_means.push(means);
        cols_dm.push(dm);
    }

    rank_check(&cols_dm, &weights, &terms)?;
    let (coef, bread) = solve_wls(&cols_dm, &y_dm, &weights, &terms)?;

    let mut residuals = y_dm;
    for (c, col) in cols_dm.iter().enumerate() {
        for (r, x) in residuals.iter_mut().zip(col) {
            *r -= coef[c] * x;
        }
    }

    // Recover stratum levels: effect_l = mean_l(y) - sum_c coef_c mean_l(x_c).
    let mut effects: BTreeMap<u32, f64> = BTreeMap::new();
    for &s in strata.groups.keys() {
        let mut e = y_means[&s];
        for (c, means) in col_means.iter().enumerate() {
            e -= coef[c] * means[&s];
        }
        effects.insert(s, e);
    }
    let reference = *effects.keys().next().expect("at least one stratum");
    let intercept = effects[&reference];
    let stratum_effects: BTreeMap<u32, f64> =
        effects.iter().map(|(&s, &e)| (s, e - intercept)).collect();

    let (r_squared, adj_r_squared) =
        r_squared_stats(&data.y, &residuals, &weights, n, k_total);

    let internals = FitInternals {
        cols: cols_dm,
        term_slots: (0..k).collect(),
        residuals,
        weights,
        bread,
        k_total,
    };
    let (vcov, n_se_clusters) = sandwich(&internals, opts.se, &data.se_cluster)?;

    Ok(RegressionFit {
        terms,
        coef,
        vcov,
        intercept,
        stratum_effects,
        n_obs: n,
        k_params: k_total,
        n_strata: strata.groups.len(),
        n_se_clusters,
        r_squared,
        adj_r_squared,
        weighted: data.weights.is_some(),
        spec: opts.kind,
        se_mode: opts.se,
        outcome: String::new(),
        internals: Some(internals),
    })
}

#[allow(clippy::too_many_arguments)]
fn fit_dummies(
    data: &RegressionData,
    opts: FitOptions,
    raw_cols: Vec<Vec<f64>>,
    terms: Vec<String>,
    weights: Vec<f64>,
    strata: StratumIndex,
    k: usize,
    k_total: usize,
) -> Result<RegressionFit> {
    let n = data.n();
    let stratum_ids: Vec<u32> = strata.groups.keys().copied().collect();
    let reference = stratum_ids[0];

    // intercept, one dummy per non-reference stratum, then terms
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut col_names: Vec<String> = vec!["intercept".to_string()];
    for &s in stratum_ids.iter().skip(1) {
        cols.push(data.stratum.iter().map(|&si| f64::from(si == s)).collect());
        col_names.push(format!("stratum_{s}"));
    }
    let term_slots: Vec<usize> = (0..k).map(|c| cols.len() + c).collect();
    cols.extend(raw_cols);
    col_names.extend(terms.iter().cloned());

    rank_check(&cols, &weights, &col_names)?;
    let (full_coef, bread) = solve_wls(&cols, &data.y, &weights, &col_names)?;

    let mut residuals = data.y.clone();
    for (c, col) in cols.iter().enumerate() {
        for (r, x) in residuals.iter_mut().zip(col) {
            *r -= full_coef[c] * x;
        }
    }

    let intercept = full_coef[0];
    let mut stratum_effects: BTreeMap<u32, f64> = BTreeMap::new();
    stratum_effects.insert(reference, 0.0);
    for (slot, &s) in stratum_ids.iter().skip(1).enumerate() {
        stratum_effects.insert(s, full_coef[1 + slot]);
    }
    let coef: Vec<f64> = term_slots.iter().map(|&s| full_coef[s]).collect();

    let (r_squared, adj_r_squared) =
        r_squared_stats(&data.y, &residuals, &weights, n, k_total);

    let internals =
        FitInternals { cols, term_slots, residuals, weights, bread, k_total };
    let (vcov, n_se_clusters) = sandwich(&internals, opts.se, &data.se_cluster)?;

    Ok(RegressionFit {
        terms,
        coef,
        vcov,
        intercept,
        stratum_effects,
        n_obs: n,
        k_params: k_total,
        n_strata: strata.groups.len(),
        n_se_clusters,
        r_squared,
        adj_r_squared,
        weighted: data.weights.is_some(),
        spec: opts.kind,
        se_mode: opts.se,
        outcome: String::new(),
        internals: Some(internals),
    })
}

/// Solves the weighted normal equations; returns coefficients and the bread
/// `(X'WX)^-1`.
fn solve_wls(
    cols: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    names: &[String],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k = cols.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for a in 0..k {
        for b in a..k {
            let v = weighted_dot(w, &cols[a], &cols[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
        rhs[a] = weighted_dot(w, &cols[a], y);
    }
    let bread = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient(names.last().cloned().unwrap_or_default()))?;
    let coef_v = &bread * rhs;
    Ok((coef_v.iter().copied().collect(), bread))
}

fn r_squared_stats(
    y: &[f64],
    residuals: &[f64],
    w: &[f64],
    n: usize,
    k_total: usize,
) -> (f64, f64) {
    let wsum: f64 = w.iter().sum();
    let ybar = y.iter().zip(w).map(|(&yi, &wi)| wi * yi).sum::<f64>() / wsum;
    let sst: f64 = y.iter().zip(w).map(|(&yi, &wi)| wi * (yi - ybar).powi(2)).sum();
    let ssr: f64 = residuals.iter().zip(w).map(|(&e, &wi)| wi * e * e).sum();
    if sst <= f64::EPSILON * wsum {
        // Constant outcome: report 0 by convention.
        return (0.0, 0.0);
    }
    let r2 = 1.0 - ssr / sst;
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - k_total as f64);
    (r2, adj)
}

/// HC1 / CR1 sandwich over the stored design, restricted to the named-term
/// block.
fn sandwich(
    internals: &FitInternals,
    mode: SeMode,
    se_cluster: &[String],
) -> Result<(Vec<Vec<f64>>, Option<usize>)> {
    let n = internals.residuals.len();
    let k = internals.cols.len();
    let k_total = internals.k_total;

    let mut meat = DMatrix::<f64>::zeros(k, k);
    let n_clusters = match mode {
        SeMode::Robust => {
            // Per-row score outer product: (w e x)(w e x)'.
            for i in 0..n {
                let s = internals.weights[i] * internals.residuals[i];
                for a in 0..k {
                    let sa = s * internals.cols[a][i];
                    for b in a..k {
                        meat[(a, b)] += sa * s * internals.cols[b][i];
                    }
                }
            }
            None
        }
        SeMode::Clustered => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, c) in se_cluster.iter().enumerate() {
                groups.entry(c.as_str()).or_default().push(i);
            }
            let g = groups.len();
            if g < 2 {
                return Err(Error::TooFewSeClusters(g));
            }
            let mut score = vec![0.0f64; k];
            for rows in groups.values() {
                score.iter_mut().for_each(|s| *s = 0.0);
                for &i in rows {
                    let s = internals.weights[i] * internals.residuals[i];
                    for (a, sc) in score.iter_mut().enumerate() {
                        *sc += s * internals.cols[a][i];
                    }
                }
                for a in 0..k {
                    for b in a..k {
                        meat[(a, b)] += score[a] * score[b];
                    }
                }
            }
            Some(g)
        }
    };
    for a in 0..k {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }

    let scale = match mode {
        SeMode::Robust => n as f64 / (n as f64 - k_total as f64),
        SeMode::Clustered => {
            let g = n_clusters.unwrap() as f64;
            g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k_total as f64)
        }
    };

    let full = &internals.bread * meat * &internals.bread * scale;
    let kt = internals.term_slots.len();
    let mut vcov = vec![vec![0.0f64; kt]; kt];
    for (a, &sa) in internals.term_slots.iter().enumerate() {
        for (b, &sb) in internals.term_slots.iter().enumerate() {
            vcov[a][b] = full[(sa, sb)];
        }
    }
    Ok((vcov, n_clusters))
}

/// Recomputes a cluster-robust (CR1) covariance for an existing fit using
/// the given per-row cluster ids.
pub fn cluster_robust_vcov(fit: &RegressionFit, cluster_ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let internals = fit
        .internals
        .as_ref()
        .ok_or_else(|| Error::Domain("fit carries no design internals".into()))?;
    if cluster_ids.len() != fit.n_obs {
        return Err(Error::DimensionMismatch { expected: fit.n_obs, got: cluster_ids.len() });
    }
    let (vcov, _) = sandwich(internals, SeMode::Clustered, cluster_ids)?;
    Ok(vcov)
}
