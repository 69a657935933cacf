//! Experiment design: cluster covariates, Mahalanobis blocking into strata
//! of eight, meta-arm and treatment randomization, and pre-treatment
//! balance checks.

mod assign;
mod balance;
mod covariates;
mod strata;

pub use assign::{assign_design, DesignParams};
pub use balance::{balance_check, BalanceGrouping, BalanceReport, MetricBalance};
pub use covariates::{compute_cluster_covariates, ClusterCovariates, CovariateSet};
pub use strata::{build_strata, mahalanobis_matrix, DistanceMatrix, StratifiedDesign};
