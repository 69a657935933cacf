//! Interference-bias decomposition of a joint fit.
//!
//! In the joint specification, the treatment coefficient estimates the
//! effect under cluster randomization and the arm-interaction coefficient
//! the extra effect picked up under Bernoulli randomization. The share of
//! the Bernoulli estimate attributable to interference is
//! `nu / (beta + nu)`.

use serde::{Deserialize, Serialize};

use super::ols::RegressionFit;
use crate::error::{Error, Result};

const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Decomposition of the Bernoulli-arm estimate into effect and bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasDecomposition {
    /// Treatment effect under cluster randomization (beta).
    pub beta: f64,
    /// Extra effect under Bernoulli randomization (nu).
    pub nu: f64,
    /// Baseline arm difference (xi).
    pub xi: f64,
    /// nu / (beta + nu).
    pub bias_share: f64,
    /// Delta-method standard error of the share.
    pub bias_share_se: f64,
}

/// Bias share from bare coefficients.
pub fn bias_share(beta: f64, nu: f64) -> Result<f64> {
    let denom = beta + nu;
    if denom.abs() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator);
    }
    Ok(nu / denom)
}

/// Full decomposition from a joint fit, with a delta-method SE from the
/// fit covariance.
pub fn joint_bias_decomposition(fit: &RegressionFit) -> Result<BiasDecomposition> {
    let beta_idx = fit
        .index_of("treatment")
        .ok_or_else(|| Error::Domain("fit has no treatment term".into()))?;
    let nu_idx = fit
        .index_of("bernoulli_x_treatment")
        .ok_or_else(|| Error::Domain("fit is not a joint fit (no interaction term)".into()))?;
    let xi_idx = fit
        .index_of("bernoulli")
        .ok_or_else(|| Error::Domain("fit is not a joint fit (no arm term)".into()))?;

    let beta = fit.coef[beta_idx];
    let nu = fit.coef[nu_idx];
    let xi = fit.coef[xi_idx];
    let share = bias_share(beta, nu)?;

    // g = nu / (beta + nu); dg/dbeta = -nu / (beta+nu)^2,
    // dg/dnu = beta / (beta+nu)^2.
    let denom2 = (beta + nu).powi(2);
    let d_beta = -nu / denom2;
    let d_nu = beta / denom2;
    let var = d_beta * d_beta * fit.vcov[beta_idx][beta_idx]
        + d_nu * d_nu * fit.vcov[nu_idx][nu_idx]
        + 2.0 * d_beta * d_nu * fit.vcov[beta_idx][nu_idx];

    Ok(BiasDecomposition { beta, nu, xi, bias_share: share, bias_share_se: var.max(0.0).sqrt() })
}
