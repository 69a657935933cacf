//! Plain-text report rendering: coefficient tables with significance
//! stars, the bias-share line, MDE tables and the demand-capture ratio
//! grid.

use crate::analyze::{BiasDecomposition, PowerReport, RegressionFit};
use crate::cluster::SizeRuleTable;

/// Display label for a term name.
fn label(term: &str) -> String {
    match term {
        "treatment" => "Treatment".to_string(),
        "bernoulli" => "Bernoulli Randomized".to_string(),
        "bernoulli_x_treatment" => "Bernoulli x Treatment".to_string(),
        "pre_bookings" => "Pre-treatment bookings".to_string(),
        "pre_nights" => "Pre-treatment nights booked".to_string(),
        "pre_booking_value" => "Pre-treatment booking value".to_string(),
        "pre_gross_spend" => "Pre-treatment gross guest spend".to_string(),
        "smart_pricing_on" => "Smart pricing pre-treatment".to_string(),
        other => other.to_string(),
    }
}

fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Renders a fitted model as an aligned coefficient table: estimate with
/// stars, standard error in parentheses, and the usual footer block.
pub fn fit_table(fit: &RegressionFit, title: &str) -> String {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for term in &fit.terms {
        let coef = fit.coefficient(term).unwrap();
        let se = fit.se(term).unwrap();
        let p = fit.p_value(term).unwrap();
        rows.push((
            label(term),
            format!("{coef:.3}{}", stars(p)),
            format!("({se:.3})"),
        ));
    }
    let name_width = rows.iter().map(|r| r.0.len()).max().unwrap_or(10).max(14);
    let val_width = rows
        .iter()
        .map(|r| r.1.len().max(r.2.len()))
        .max()
        .unwrap_or(8);

    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&"=".repeat(name_width + val_width + 2));
    out.push('\n');
    for (name, value, se) in &rows {
        out.push_str(&format!("{name:<name_width$}  {value:>val_width$}\n"));
        out.push_str(&format!("{:<name_width$}  {se:>val_width$}\n", ""));
    }
    out.push_str(&"-".repeat(name_width + val_width + 2));
    out.push('\n');
    let yesno = |b: bool| if b { "Yes" } else { "No" };
    out.push_str(&format!("{:<name_width$}  {:>val_width$}\n", "Stratum F.E.", yesno(fit.n_strata > 0)));
    out.push_str(&format!("{:<name_width$}  {:>val_width$}\n", "Robust s.e.", "Yes"));
    out.push_str(&format!(
        "{:<name_width$}  {:>val_width$}\n",
        "Clustered s.e.",
        yesno(fit.n_se_clusters.is_some())
    ));
    out.push_str(&format!("{:<name_width$}  {:>val_width$.3}\n", "R2", fit.r_squared));
    out.push_str(&format!("{:<name_width$}  {:>val_width$.3}\n", "Adjusted R2", fit.adj_r_squared));
    out.push_str(&format!("{:<name_width$}  {:>val_width$}\n", "Observations", fit.n_obs));
    out.push_str(&"=".repeat(name_width + val_width + 2));
    out.push('\n');
    out.push_str("Note: *p<0.1; **p<0.05; ***p<0.01\n");
    out
}

/// One-line interference-bias summary.
pub fn bias_line(d: &BiasDecomposition) -> String {
    format!(
        "Interference bias share of the Bernoulli estimate: {:.2}% (+/-{:.2}%) \
         [beta {:.4}, nu {:.4}, xi {:.4}]",
        d.bias_share * 100.0,
        d.bias_share_se * 100.0,
        d.beta,
        d.nu,
        d.xi
    )
}

/// MDE table over the design terms (covariate rows are skipped).
pub fn mde_table(report: &PowerReport) -> String {
    let design_terms = ["treatment", "bernoulli_x_treatment", "bernoulli"];
    let mut out = String::new();
    out.push_str(&format!(
        "Minimum detectable effects (power = {:.0}%, confidence level = {:.0}%)\n",
        report.power * 100.0,
        report.confidence * 100.0
    ));
    out.push_str(&format!("{:<24} {:>10} {:>10}\n", "Regressor", "SE", "MDE"));
    for term in design_terms {
        if let Some(row) = report.rows.iter().find(|r| r.term == term) {
            out.push_str(&format!("{:<24} {:>10.3} {:>10.3}\n", label(term), row.se, row.mde));
        }
    }
    out
}

/// The 4x5 demand-capture ratio grid.
pub fn capture_ratio_table(table: &SizeRuleTable) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<10} {:>12} {:>10} {:>10} {:>10} {:>10}\n",
        "Single views?", "Viewers", "avg share", "avg HHI", "% over 67", "% over 75", "% over 90"
    ));
    for row in &table.rows {
        out.push_str(&format!(
            "{:<14} {:<10} {:>12.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2}\n",
            if row.filters.include_single_view_users { "Yes" } else { "No" },
            if row.filters.bookers_only { "Bookers" } else { "All" },
            row.avg_cluster_share,
            row.avg_hhi,
            row.pct_over_67,
            row.pct_over_75,
            row.pct_over_90,
        ));
    }
    out
}
