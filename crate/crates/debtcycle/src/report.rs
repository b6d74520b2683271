//! Serializable fit summaries and table rendering.
//!
//! Every rendered cell is read from a summary struct that is also written to
//! JSON at full precision; rendering only rounds (4 decimals) and attaches
//! pre-computed significance stars (two-sided z-tests at 10/5/1%).

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::covariates::PcaResult;
use crate::error::Result;
use crate::fe::FeFit;
use crate::stats::{ConditionalDurationRow, GroupSummary, Moments};
use crate::survival::{lr_test, FrailtyFit};

pub fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("valid standard normal");
    2.0 * (1.0 - n.cdf(z.abs()))
}

pub fn chi_squared_p(statistic: f64, df: usize) -> f64 {
    if df == 0 || statistic <= 0.0 {
        return 1.0;
    }
    let chi = ChiSquared::new(df as f64).expect("valid dof");
    1.0 - chi.cdf(statistic)
}

/// `*` p<0.10, `**` p<0.05, `***` p<0.01.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.10 {
        "*"
    } else {
        ""
    }
}

/// One estimated parameter with its test statistics, computed once at
/// summary construction so rendering stays arithmetic-free.
#[derive(Debug, Clone, Serialize)]
pub struct TermSummary {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

impl TermSummary {
    fn new(name: &str, estimate: f64, std_error: Option<f64>) -> Self {
        let z = std_error.map(|se| estimate / se);
        let p_value = z.map(normal_two_sided_p);
        Self {
            name: name.to_string(),
            estimate,
            std_error,
            z,
            p_value,
            stars: p_value.map(stars).unwrap_or("").to_string(),
        }
    }

    /// `estimate*** (se)` cell, 4 decimals.
    fn cell(&self) -> String {
        match self.std_error {
            Some(se) => format!("{:.4}{} ({:.4})", self.estimate, self.stars, se),
            None => format!("{:.4} (n/a)", self.estimate),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LrSummary {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub stars: String,
}

/// A fitted survival model flattened for serialization and rendering.
#[derive(Debug, Clone, Serialize)]
pub struct SurvivalFitSummary {
    pub label: String,
    pub terms: Vec<TermSummary>,
    pub constant: TermSummary,
    pub ln_p: TermSummary,
    pub ln_theta: TermSummary,
    pub log_likelihood: f64,
    pub lr: Option<LrSummary>,
    pub n: usize,
    pub n_groups: usize,
    pub converged: bool,
    pub theta_pinned: bool,
    pub warnings: Vec<String>,
}

impl SurvivalFitSummary {
    /// Summarize a fit, attaching the LR test against `baseline` when given.
    pub fn new(fit: &FrailtyFit, baseline: Option<&FrailtyFit>) -> Result<Self> {
        let k = fit.covariate_names.len();
        let constant = TermSummary::new("constant", fit.beta_aft[0], fit.std_errors[0]);
        let terms: Vec<TermSummary> = (0..k)
            .map(|j| {
                TermSummary::new(
                    &fit.covariate_names[j],
                    fit.beta_aft[j + 1],
                    fit.std_errors[j + 1],
                )
            })
            .collect();
        let ln_p = TermSummary::new("ln_p", fit.ln_p, fit.std_errors[k + 1]);
        let ln_theta = TermSummary::new("ln_theta", fit.ln_theta, fit.std_errors[k + 2]);
        let lr = match baseline {
            Some(null) if null.covariate_names.len() < fit.covariate_names.len() => {
                let (statistic, df) = lr_test(fit, null)?;
                let p_value = chi_squared_p(statistic, df);
                Some(LrSummary {
                    statistic,
                    df,
                    p_value,
                    stars: stars(p_value).to_string(),
                })
            }
            _ => None,
        };
        Ok(Self {
            label: fit.label.clone(),
            terms,
            constant,
            ln_p,
            ln_theta,
            log_likelihood: fit.log_likelihood,
            lr,
            n: fit.n,
            n_groups: fit.n_groups,
            converged: fit.converged,
            theta_pinned: fit.theta_pinned,
            warnings: fit.warnings.clone(),
        })
    }
}

/// A fixed-effects fit flattened the same way.
#[derive(Debug, Clone, Serialize)]
pub struct FeFitSummary {
    pub label: String,
    pub terms: Vec<TermSummary>,
    pub constant: f64,
    pub log_likelihood: f64,
    pub n: usize,
    pub n_groups: usize,
    pub warnings: Vec<String>,
}

impl FeFitSummary {
    pub fn new(label: &str, fit: &FeFit) -> Self {
        let terms = fit
            .coefficient_names
            .iter()
            .zip(fit.coefficients.iter().zip(&fit.std_errors))
            .map(|(name, (&est, &se))| TermSummary::new(name, est, Some(se)))
            .collect();
        Self {
            label: label.to_string(),
            terms,
            constant: fit.constant,
            log_likelihood: fit.log_likelihood,
            n: fit.n,
            n_groups: fit.n_groups,
            warnings: fit.warnings.clone(),
        }
    }
}

fn term_row_order(columns: &[Vec<TermSummary>]) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    for col in columns {
        for t in col {
            if !order.contains(&t.name) {
                order.push(t.name.clone());
            }
        }
    }
    order
}

fn md_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

/// Ladder table: one column per model, coefficient rows first, then the
/// constant, shape, frailty, log-likelihood, LR and N rows.
pub fn render_survival_table_md(title: &str, fits: &[SurvivalFitSummary]) -> String {
    let term_cols: Vec<Vec<TermSummary>> = fits.iter().map(|f| f.terms.clone()).collect();
    let order = term_row_order(&term_cols);
    let mut header = vec![String::new()];
    header.extend(fits.iter().map(|f| f.label.clone()));
    let mut rows = Vec::new();
    for name in &order {
        let mut row = vec![name.clone()];
        for f in fits {
            row.push(
                f.terms
                    .iter()
                    .find(|t| &t.name == name)
                    .map(|t| t.cell())
                    .unwrap_or_default(),
            );
        }
        rows.push(row);
    }
    let mut push_term_row = |label: &str, pick: &dyn Fn(&SurvivalFitSummary) -> &TermSummary| {
        let mut row = vec![label.to_string()];
        for f in fits {
            row.push(pick(f).cell());
        }
        rows.push(row);
    };
    push_term_row("Constant", &|f| &f.constant);
    push_term_row("Weibull shape parameter (ln p)", &|f| &f.ln_p);
    push_term_row("Frailty parameter (ln theta)", &|f| &f.ln_theta);
    let mut ll_row = vec!["Log likelihood".to_string()];
    let mut lr_row = vec!["LR Chi-squared".to_string()];
    let mut n_row = vec!["Number of observations".to_string()];
    for f in fits {
        ll_row.push(format!("{:.4}", f.log_likelihood));
        lr_row.push(
            f.lr.as_ref()
                .map(|lr| format!("{:.4}{}", lr.statistic, lr.stars))
                .unwrap_or_default(),
        );
        n_row.push(f.n.to_string());
    }
    rows.push(ll_row);
    rows.push(lr_row);
    rows.push(n_row);
    format!("## {title}\n\n{}", md_table(&header, &rows))
}

/// Long-format CSV of survival fits: one row per (model, parameter).
pub fn render_survival_fits_csv(fits: &[SurvivalFitSummary]) -> String {
    let mut out =
        String::from("model,term,estimate,std_error,z,p_value,stars,log_likelihood,lr_statistic,lr_df,lr_p_value,n,n_groups,converged\n");
    for f in fits {
        let mut all = vec![f.constant.clone()];
        all.extend(f.terms.clone());
        all.push(f.ln_p.clone());
        all.push(f.ln_theta.clone());
        for t in all {
            out.push_str(&format!(
                "{},{},{:.10},{},{},{},{},{:.10},{},{},{},{},{},{}\n",
                f.label,
                t.name,
                t.estimate,
                t.std_error.map(|v| format!("{v:.10}")).unwrap_or_default(),
                t.z.map(|v| format!("{v:.10}")).unwrap_or_default(),
                t.p_value.map(|v| format!("{v:.10}")).unwrap_or_default(),
                t.stars,
                f.log_likelihood,
                f.lr.as_ref()
                    .map(|l| format!("{:.10}", l.statistic))
                    .unwrap_or_default(),
                f.lr.as_ref().map(|l| l.df.to_string()).unwrap_or_default(),
                f.lr.as_ref()
                    .map(|l| format!("{:.10}", l.p_value))
                    .unwrap_or_default(),
                f.n,
                f.n_groups,
                f.converged,
            ));
        }
    }
    out
}

pub fn render_fe_table_md(title: &str, fits: &[FeFitSummary]) -> String {
    let term_cols: Vec<Vec<TermSummary>> = fits.iter().map(|f| f.terms.clone()).collect();
    let order = term_row_order(&term_cols);
    let mut header = vec![String::new()];
    header.extend(fits.iter().map(|f| f.label.clone()));
    let mut rows = Vec::new();
    for name in &order {
        let mut row = vec![name.clone()];
        for f in fits {
            row.push(
                f.terms
                    .iter()
                    .find(|t| &t.name == name)
                    .map(|t| t.cell())
                    .unwrap_or_default(),
            );
        }
        rows.push(row);
    }
    let mut const_row = vec!["Constant".to_string()];
    let mut ll_row = vec!["Log likelihood".to_string()];
    let mut n_row = vec!["Number of observations".to_string()];
    for f in fits {
        const_row.push(format!("{:.4}", f.constant));
        ll_row.push(format!("{:.4}", f.log_likelihood));
        n_row.push(f.n.to_string());
    }
    rows.push(const_row);
    rows.push(ll_row);
    rows.push(n_row);
    format!("## {title}\n\n{}", md_table(&header, &rows))
}

pub fn render_fe_fits_csv(fits: &[FeFitSummary]) -> String {
    let mut out = String::from(
        "model,term,estimate,std_error,z,p_value,stars,constant,log_likelihood,n,n_groups\n",
    );
    for f in fits {
        for t in &f.terms {
            out.push_str(&format!(
                "{},{},{:.10},{},{},{},{},{:.10},{:.10},{},{}\n",
                f.label,
                t.name,
                t.estimate,
                t.std_error.map(|v| format!("{v:.10}")).unwrap_or_default(),
                t.z.map(|v| format!("{v:.10}")).unwrap_or_default(),
                t.p_value.map(|v| format!("{v:.10}")).unwrap_or_default(),
                t.stars,
                f.constant,
                f.log_likelihood,
                f.n,
                f.n_groups,
            ));
        }
    }
    out
}

fn fmt_moments(m: &Option<Moments>) -> String {
    match m {
        None => "".to_string(),
        Some(m) => match m.sd {
            Some(sd) => format!("{:.4} ({:.4})", m.mean, sd),
            None => format!("{:.4} (n/a)", m.mean),
        },
    }
}

/// Phase-feature table: mean (sd) cells per group with association counts.
pub fn render_group_summary_md(title: &str, rows: &[GroupSummary]) -> String {
    let header: Vec<String> = [
        "group",
        "kind",
        "horizon",
        "events",
        "duration (quarters)",
        "amplitude (%)",
        "slope (% per quarter)",
        "credit assoc.",
        "house assoc.",
        "equity assoc.",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.group.clone(),
                r.kind.label().to_string(),
                r.horizon.label().to_string(),
                r.n_events.to_string(),
                fmt_moments(&r.duration),
                fmt_moments(&r.amplitude),
                fmt_moments(&r.slope),
                r.n_credit_assoc.to_string(),
                r.n_house_assoc.to_string(),
                r.n_equity_assoc.to_string(),
            ]
        })
        .collect();
    format!("## {title}\n\n{}", md_table(&header, &body))
}

pub fn render_group_summary_csv(rows: &[GroupSummary]) -> String {
    let mut out = String::from(
        "group,kind,horizon,n_events,duration_mean,duration_sd,duration_se,amplitude_mean,amplitude_sd,amplitude_se,slope_mean,slope_sd,slope_se,n_credit_assoc,n_house_assoc,n_equity_assoc\n",
    );
    let fmt = |m: &Option<Moments>| -> (String, String, String) {
        match m {
            None => Default::default(),
            Some(m) => (
                format!("{:.10}", m.mean),
                m.sd.map(|v| format!("{v:.10}")).unwrap_or_default(),
                m.se.map(|v| format!("{v:.10}")).unwrap_or_default(),
            ),
        }
    };
    for r in rows {
        let d = fmt(&r.duration);
        let a = fmt(&r.amplitude);
        let s = fmt(&r.slope);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.group,
            r.kind.label(),
            r.horizon.label(),
            r.n_events,
            d.0,
            d.1,
            d.2,
            a.0,
            a.1,
            a.2,
            s.0,
            s.1,
            s.2,
            r.n_credit_assoc,
            r.n_house_assoc,
            r.n_equity_assoc,
        ));
    }
    out
}

/// Bar-chart data for conditional duration means.
pub fn render_conditional_durations_csv(rows: &[ConditionalDurationRow]) -> String {
    let mut out = String::from("category,n,mean_duration\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.category,
            r.n,
            r.mean_duration
                .map(|v| format!("{v:.10}"))
                .unwrap_or_default()
        ));
    }
    out
}

/// PCA block for the robustness report, stating the cumulative fraction
/// carried by the retained components.
#[derive(Debug, Clone, Serialize)]
pub struct PcaSummary {
    pub variable_names: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub fractions: Vec<f64>,
    pub components_used: usize,
    pub cumulative_fraction: f64,
}

impl PcaSummary {
    pub fn new(pca: &PcaResult, components_used: usize) -> Self {
        Self {
            variable_names: pca.variable_names.clone(),
            eigenvalues: pca.eigenvalues.clone(),
            fractions: pca.fractions.clone(),
            components_used,
            cumulative_fraction: pca.top_fraction(components_used),
        }
    }
}

pub fn render_pca_summary_md(summary: &PcaSummary) -> String {
    let mut out = String::from("## Principal components of the macro controls\n\n");
    out.push_str("| component | eigenvalue | fraction |\n|---|---|---|\n");
    for (i, (l, f)) in summary
        .eigenvalues
        .iter()
        .zip(&summary.fractions)
        .enumerate()
    {
        out.push_str(&format!("| PC{} | {:.4} | {:.4} |\n", i + 1, l, f));
    }
    out.push_str(&format!(
        "\nVariance contribution of the first {} components: {:.4}\n",
        summary.components_used, summary.cumulative_fraction
    ));
    out
}
