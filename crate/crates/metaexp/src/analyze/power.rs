//! Minimum detectable effects and sample-size scaling.

use serde::{Deserialize, Serialize};

use super::ols::RegressionFit;
use super::stats::normal_quantile;
use crate::error::{Error, Result};

pub const DEFAULT_POWER: f64 = 0.80;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Minimum detectable effect for a standard error:
/// `(z_{1-alpha/2} + z_power) * se`. At the defaults the multiplier is
/// 2.8016.
pub fn mde(se: f64, power: f64, confidence: f64) -> Result<f64> {
    if !(se >= 0.0 && se.is_finite()) {
        return Err(Error::Domain(format!("se must be non-negative, got {se}")));
    }
    Ok(mde_multiplier(power, confidence)? * se)
}

/// The `z_{1-alpha/2} + z_power` factor.
pub fn mde_multiplier(power: f64, confidence: f64) -> Result<f64> {
    if !(power > 0.0 && power < 1.0) {
        return Err(Error::Domain(format!("power must be in (0,1), got {power}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must be in (0,1), got {confidence}")));
    }
    let z_alpha = normal_quantile(1.0 - (1.0 - confidence) / 2.0)?;
    let z_power = normal_quantile(power)?;
    Ok(z_alpha + z_power)
}

/// Sample-size multiple needed to power a target effect, under the
/// square-root law for standard errors:
/// `((z_{1-alpha/2} + z_power) * se / |effect|)^2`.
pub fn required_sample_scale(
    se_current: f64,
    target_effect: f64,
    power: f64,
    confidence: f64,
) -> Result<f64> {
    if !(se_current > 0.0 && se_current.is_finite()) {
        return Err(Error::Domain(format!("se must be positive, got {se_current}")));
    }
    if target_effect == 0.0 || !target_effect.is_finite() {
        return Err(Error::Domain("target effect must be nonzero and finite".into()));
    }
    let m = mde_multiplier(power, confidence)?;
    Ok((se_current * m / target_effect.abs()).powi(2))
}

/// Per-term MDEs at the stated power and confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub power: f64,
    pub confidence: f64,
    pub z_alpha: f64,
    pub z_power: f64,
    pub rows: Vec<PowerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub term: String,
    pub se: f64,
    pub mde: f64,
}

/// Builds the MDE table for every named term of a fit.
pub fn power_report(fit: &RegressionFit, power: f64, confidence: f64) -> Result<PowerReport> {
    let z_alpha = normal_quantile(1.0 - (1.0 - confidence) / 2.0)?;
    let z_power = normal_quantile(power)?;
    let rows = fit
        .terms
        .iter()
        .map(|term| {
            let se = fit.se(term).expect("term exists");
            Ok(PowerRow { term: term.clone(), se, mde: (z_alpha + z_power) * se })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerReport { power, confidence, z_alpha, z_power, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_multiplier_is_2_8016() {
        let m = mde_multiplier(DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap();
        assert!((m - 2.8016).abs() < 5e-5, "multiplier {m}");
    }

    #[test]
    fn reference_mde_values() {
        let m1 = mde(0.030, DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap();
        assert!((m1 - 0.084).abs() < 0.001, "{m1}");
        let m2 = mde(0.041, DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap();
        assert!((m2 - 0.115).abs() < 0.001, "{m2}");
        // The same two SEs at lower precision inputs round as published.
        assert_eq!(mde(0.0, DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap(), 0.0);
    }

    #[test]
    fn mde_is_linear_in_se() {
        let a = mde(0.25, 0.8, 0.95).unwrap();
        let b = mde(0.5, 0.8, 0.95).unwrap();
        assert!((2.0 * a - b).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(mde(0.1, 0.0, 0.95).is_err());
        assert!(mde(0.1, 0.8, 1.0).is_err());
        assert!(mde(-0.1, 0.8, 0.95).is_err());
    }

    #[test]
    fn sample_scale_reference_value() {
        let f = required_sample_scale(0.041, 0.059, DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap();
        assert!((f - 3.79).abs() < 0.01, "{f}");
    }

    #[test]
    fn effect_at_mde_needs_factor_one() {
        let se = 0.037;
        let effect = mde(se, DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap();
        let f = required_sample_scale(se, effect, DEFAULT_POWER, DEFAULT_CONFIDENCE).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halving_se_quarters_the_factor() {
        let f1 = required_sample_scale(0.04, 0.02, 0.8, 0.95).unwrap();
        let f2 = required_sample_scale(0.02, 0.02, 0.8, 0.95).unwrap();
        assert!((f1 / f2 - 4.0).abs() < 1e-9);
    }
}
