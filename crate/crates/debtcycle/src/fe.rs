//! Fixed-effects (within) OLS for amplitude regressions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Within-estimator fit: slopes, the grand-mean constant, and a Gaussian
/// log-likelihood evaluated at the MLE variance.
#[derive(Debug, Clone, Serialize)]
pub struct FeFit {
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Unweighted mean of the estimated group effects, reported as the
    /// table constant.
    pub constant: f64,
    pub residual_variance: f64,
    pub log_likelihood: f64,
    pub n: usize,
    pub n_groups: usize,
    pub warnings: Vec<String>,
}

/// Gaussian log-likelihood of residuals at the MLE variance RSS/n.
/// Zero RSS is signaled as positive infinity.
pub fn gaussian_loglik(residuals: &[f64], n: usize) -> f64 {
    assert!(n >= 1, "need at least one observation");
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    if rss == 0.0 {
        return f64::INFINITY;
    }
    let n = n as f64;
    -n / 2.0 * ((2.0 * std::f64::consts::PI).ln() + (rss / n).ln() + 1.0)
}

/// Demeaned-by-group OLS. `x` may include an all-ones intercept column; it
/// is absorbed into the group effects. Any other column that is constant
/// within every group is annihilated by demeaning and reported as a rank
/// error naming the column.
pub fn fit_fixed_effects(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    groups: &[String],
) -> Result<FeFit> {
    let n = y.len();
    assert_eq!(x.nrows(), n, "row count mismatch");
    assert_eq!(x.ncols(), names.len(), "one name per column");
    assert_eq!(groups.len(), n, "one group id per row");

    // Drop an explicit intercept column; its effect is absorbed by the
    // fixed effects and resurfaces as the reported constant.
    let kept: Vec<usize> = (0..x.ncols())
        .filter(|&j| !x.column(j).iter().all(|&v| v == 1.0))
        .collect();
    let names: Vec<String> = kept.iter().map(|&j| names[j].clone()).collect();
    let x = x.select_columns(kept.iter());
    let k = x.ncols();

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for g in groups {
        let next = index.len();
        index.entry(g.as_str()).or_insert(next);
    }
    let n_groups = index.len();
    let mut count = vec![0usize; n_groups];
    let mut y_sum = vec![0.0; n_groups];
    let mut x_sum: DMatrix<f64> = DMatrix::zeros(n_groups, k);
    for (i, g) in groups.iter().enumerate() {
        let gi = index[g.as_str()];
        count[gi] += 1;
        y_sum[gi] += y[i];
        for j in 0..k {
            x_sum[(gi, j)] += x[(i, j)];
        }
    }
    let mut warnings = Vec::new();
    if count.contains(&1) {
        warnings.push("groups of size 1 contribute nothing to slope identification".to_string());
    }

    let mut y_w = DVector::zeros(n);
    let mut x_w = DMatrix::zeros(n, k);
    for (i, g) in groups.iter().enumerate() {
        let gi = index[g.as_str()];
        let c = count[gi] as f64;
        y_w[i] = y[i] - y_sum[gi] / c;
        for j in 0..k {
            x_w[(i, j)] = x[(i, j)] - x_sum[(gi, j)] / c;
        }
    }

    // Columns wiped out by demeaning are group-constant regressors.
    let mut dead = Vec::new();
    for j in 0..k {
        let scale = x.column(j).amax().max(1.0);
        if x_w.column(j).amax() <= 1e-12 * scale {
            dead.push(names[j].clone());
        }
    }
    if !dead.is_empty() {
        return Err(Error::RankDeficient { columns: dead });
    }

    let (beta, xtx_inv) = if k == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let xtx = x_w.transpose() * &x_w;
        let xty = x_w.transpose() * &y_w;
        let chol = nalgebra::Cholesky::new(xtx).ok_or_else(|| Error::RankDeficient {
            columns: collinear_columns(&x_w, &names),
        })?;
        (chol.solve(&xty), chol.inverse())
    };

    let fitted_w = &x_w * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y_w[i] - fitted_w[i]).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();

    // Spec convention for the within-regression degrees of freedom.
    let df = n as i64 - k as i64 - n_groups as i64 + 1;
    if df < 1 {
        return Err(Error::InvalidRules(format!(
            "not enough observations: n={n}, k={k}, groups={n_groups}"
        )));
    }
    let sigma2 = rss / df as f64;
    let std_errors: Vec<f64> = (0..k).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();

    // Group effects a_g = mean_g(y) - mean_g(x) * beta; the constant is
    // their unweighted mean.
    let mut constant = 0.0;
    for gi in 0..n_groups {
        let c = count[gi] as f64;
        let mut effect = y_sum[gi] / c;
        for j in 0..k {
            effect -= x_sum[(gi, j)] / c * beta[j];
        }
        constant += effect;
    }
    constant /= n_groups as f64;

    Ok(FeFit {
        coefficient_names: names,
        coefficients: beta.iter().copied().collect(),
        std_errors,
        constant,
        residual_variance: sigma2,
        log_likelihood: gaussian_loglik(&residuals, n),
        n,
        n_groups,
        warnings,
    })
}

/// Name columns implicated in a collinear demeaned design via the R² of
/// regressing each column on the others.
fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let k = x.ncols();
    let mut out = Vec::new();
    for j in 0..k {
        let target = x.column(j).clone_owned();
        let others = x.select_columns((0..k).filter(|&c| c != j).collect::<Vec<_>>().iter());
        let svd = others.clone().svd(true, true);
        let tol = svd.singular_values.max() * 1e-12 * x.nrows() as f64;
        if let Ok(coef) = svd.solve(&target, tol) {
            let resid = &target - others * coef;
            let tss = target.norm_squared();
            if tss > 0.0 && resid.norm_squared() / tss < 1e-8 {
                out.push(names[j].clone());
            }
        }
    }
    if out.is_empty() {
        out = names.to_vec();
    }
    out
}
