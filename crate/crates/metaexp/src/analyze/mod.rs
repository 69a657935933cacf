//! Estimation: least squares with stratum fixed effects, cluster-robust
//! covariance, KS balance tests, power math, bias decomposition and the
//! aggregated / mixed-unit analysis variants.

mod bias;
mod data;
mod ols;
mod power;
mod stats;
mod variants;

pub use bias::{bias_share, joint_bias_decomposition, BiasDecomposition};
pub use data::{OutcomeKind, RegressionCovariates, RegressionData};
pub use ols::{
    cluster_robust_vcov, ols_fit, FeMode, FitOptions, RegressionFit, SeMode, SpecKind,
};
pub use power::{
    mde, mde_multiplier, power_report, required_sample_scale, PowerReport, PowerRow,
    DEFAULT_CONFIDENCE, DEFAULT_POWER,
};
pub use stats::{kolmogorov_survival, ks_test, normal_cdf, normal_quantile, two_sided_p, KsResult};
pub use variants::{cluster_aggregated_fit, constrained_subset, mixed_unit_fit, ConstraintKind};
