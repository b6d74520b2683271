//! Weibull AFT duration model with inverse-Gaussian shared frailty.
//!
//! Durations t_ij (spell j of group i) have conditional hazard
//! `alpha_i * p * t^(p-1) * exp(x' beta_tilde)` given the group frailty
//! alpha_i, which has mean 1 and variance theta. With every spell an
//! observed event (only completed phases are dated), integrating the
//! frailty out gives the marginal log-likelihood
//!
//! ```text
//! sum_i { ln[ (-1)^{d_i} L^{(d_i)}(H_i) ] + sum_j ln h0_ij }
//! ```
//!
//! where `h0_ij = p t^(p-1) exp(x' beta_tilde)`, `H_i = sum_j t^p exp(x' beta_tilde)`,
//! `d_i` is the group's spell count, and `L(s) = exp[(1 - sqrt(1 + 2 theta s)) / theta]`
//! is the Laplace transform of the inverse-Gaussian frailty. Derivatives of
//! L are evaluated through an all-positive coefficient recurrence in powers
//! of `u = sqrt(1 + 2 theta s)`, so no cancellation occurs at any order.
//!
//! Coefficients are estimated and reported on the AFT (log-duration) scale;
//! internally the hazard uses `beta_tilde = -p * beta_aft`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, Floor, MaximizeOptions};

/// log L(s) for the inverse-Gaussian frailty Laplace transform, computed as
/// `-2s / (sqrt(1 + 2 theta s) + 1)` so the theta -> 0 limit (-s) is exact.
pub fn ig_log_laplace(theta: f64, s: f64) -> f64 {
    -2.0 * s / ((1.0 + 2.0 * theta * s).sqrt() + 1.0)
}

/// `ln[ (-1)^d L^(d)(s) ]` for the inverse-Gaussian Laplace transform.
///
/// Writing L^(d)(s) = (-1)^d Q_d(u) L(s) with u = sqrt(1 + 2 theta s), the
/// coefficients of Q_d (a polynomial in 1/u) obey
/// `Q_{d+1}[k+1] += Q_d[k]` and `Q_{d+1}[k+2] += k * theta * Q_d[k]`,
/// starting from Q_0 = 1. All coefficients are positive.
pub fn ig_log_laplace_deriv(d: usize, theta: f64, s: f64) -> f64 {
    let u = (1.0 + 2.0 * theta * s).sqrt();
    if !u.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut coeffs = vec![1.0f64];
    let mut scale_ln = 0.0;
    for _ in 0..d {
        let mut next = vec![0.0; coeffs.len() + 2];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            next[k + 1] += c;
            next[k + 2] += k as f64 * theta * c;
        }
        let max = next.iter().cloned().fold(0.0f64, f64::max);
        if max > 1e250 {
            for c in next.iter_mut() {
                *c /= max;
            }
            scale_ln += max.ln();
        }
        coeffs = next;
    }
    let ln_u = u.ln();
    let mut max_term = f64::NEG_INFINITY;
    let terms: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(k, &c)| c.ln() - k as f64 * ln_u)
        .collect();
    for &t in &terms {
        max_term = max_term.max(t);
    }
    let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
    scale_ln + max_term + sum.ln() + ig_log_laplace(theta, s)
}

/// One observed spell: group id, duration in quarters, covariates in the
/// dataset's column order (no intercept; it is implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSpell {
    pub group: String,
    pub duration: f64,
    pub covariates: Vec<f64>,
}

/// Spell-level duration dataset with a named covariate pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalData {
    covariate_names: Vec<String>,
    spells: Vec<SurvivalSpell>,
    group_index: Vec<usize>,
    group_labels: Vec<String>,
    ln_durations: Vec<f64>,
}

impl SurvivalData {
    pub fn new(covariate_names: Vec<String>, spells: Vec<SurvivalSpell>) -> Result<Self> {
        if spells.is_empty() {
            return Err(Error::InvalidSurvivalData("no spells".into()));
        }
        let mut labels: Vec<String> = Vec::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut group_index = Vec::with_capacity(spells.len());
        for s in &spells {
            if !s.duration.is_finite() || s.duration <= 0.0 {
                return Err(Error::InvalidSurvivalData(format!(
                    "non-positive duration {} in group {}",
                    s.duration, s.group
                )));
            }
            if s.covariates.len() != covariate_names.len() {
                return Err(Error::InvalidSurvivalData(format!(
                    "spell in group {} has {} covariates, expected {}",
                    s.group,
                    s.covariates.len(),
                    covariate_names.len()
                )));
            }
            let next = seen.len();
            let idx = *seen.entry(s.group.clone()).or_insert(next);
            if idx == labels.len() {
                labels.push(s.group.clone());
            }
            group_index.push(idx);
        }
        let ln_durations = spells.iter().map(|s| s.duration.ln()).collect();
        Ok(Self {
            covariate_names,
            spells,
            group_index,
            group_labels: labels,
            ln_durations,
        })
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn spells(&self) -> &[SurvivalSpell] {
        &self.spells
    }

    pub fn n(&self) -> usize {
        self.spells.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    /// Restrict to a named covariate subset, preserving spell order.
    pub fn select(&self, names: &[String]) -> Result<SurvivalData> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.covariate_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::UnknownCovariate(n.clone()))
            })
            .collect::<Result<_>>()?;
        let spells = self
            .spells
            .iter()
            .map(|s| SurvivalSpell {
                group: s.group.clone(),
                duration: s.duration,
                covariates: idx.iter().map(|&j| s.covariates[j]).collect(),
            })
            .collect();
        SurvivalData::new(names.to_vec(), spells)
    }

    /// Design matrix with the leading intercept column.
    fn design(&self) -> DMatrix<f64> {
        let k = self.covariate_names.len() + 1;
        DMatrix::from_fn(self.spells.len(), k, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.spells[i].covariates[j - 1]
            }
        })
    }
}

/// Marginal log-likelihood at AFT-scale parameters. `beta_aft` carries the
/// intercept first, matching `["constant"] ++ covariate_names`. Overflow at
/// extreme parameters yields a non-finite value for the optimizer to
/// backtrack over.
pub fn marginal_loglik(beta_aft: &[f64], ln_p: f64, ln_theta: f64, data: &SurvivalData) -> f64 {
    assert_eq!(
        beta_aft.len(),
        data.covariate_names.len() + 1,
        "one coefficient per design column"
    );
    let p = ln_p.exp();
    let theta = ln_theta.exp();
    if !p.is_finite() || !theta.is_finite() || p <= 0.0 {
        return f64::NAN;
    }

    // Neumaier-compensated accumulation: the optimizer's finite-difference
    // gradient needs the objective accurate to ~eps*|f|, not n*eps*|f|.
    let mut ll = 0.0;
    let mut comp = 0.0;
    let mut add = |ll: &mut f64, term: f64| {
        let sum = *ll + term;
        comp += if ll.abs() >= term.abs() {
            (*ll - sum) + term
        } else {
            (term - sum) + *ll
        };
        *ll = sum;
    };
    let mut cumulative = vec![0.0f64; data.n_groups()];
    let mut events = vec![0usize; data.n_groups()];
    for ((spell, &gi), &ln_t) in data
        .spells
        .iter()
        .zip(&data.group_index)
        .zip(&data.ln_durations)
    {
        let mut xb = beta_aft[0];
        for (x, b) in spell.covariates.iter().zip(&beta_aft[1..]) {
            xb += x * b;
        }
        let xb_tilde = -p * xb;
        add(&mut ll, ln_p + (p - 1.0) * ln_t + xb_tilde);
        cumulative[gi] += (p * ln_t + xb_tilde).exp();
        events[gi] += 1;
    }
    for (h, d) in cumulative.iter().zip(&events) {
        if !h.is_finite() {
            return f64::NAN;
        }
        add(&mut ll, ig_log_laplace_deriv(*d, theta, *h));
    }
    let total = ll + comp;
    if total.is_finite() {
        total
    } else {
        f64::NAN
    }
}

/// A named covariate subset, e.g. one rung of the M1..M8 ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub label: String,
    pub covariates: Vec<String>,
}

impl ModelSpec {
    pub fn new(label: impl Into<String>, covariates: Vec<String>) -> Self {
        Self {
            label: label.into(),
            covariates,
        }
    }

    /// True when `null`'s covariates are a subset of this model's.
    pub fn nests(&self, null: &ModelSpec) -> bool {
        null.covariates.iter().all(|c| self.covariates.contains(c))
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Perturbed-start attempts after the default start.
    pub restarts: usize,
    pub restart_scale: f64,
    pub restart_seed: u64,
    /// Lower bound on ln theta, emulating degenerate-frailty fits without
    /// numerical blow-up.
    pub ln_theta_floor: f64,
    /// Designs with condition number above this are rejected.
    pub condition_limit: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            restarts: 5,
            restart_scale: 0.1,
            restart_seed: 0,
            ln_theta_floor: -20.0,
            condition_limit: 1e8,
        }
    }
}

/// Estimated frailty model. Parameter order everywhere is
/// `[constant, covariates.., ln_p, ln_theta]`.
#[derive(Debug, Clone)]
pub struct FrailtyFit {
    pub label: String,
    pub covariate_names: Vec<String>,
    /// AFT-scale coefficients: constant first, then one per covariate.
    pub beta_aft: Vec<f64>,
    pub ln_p: f64,
    pub ln_theta: f64,
    pub covariance: Option<DMatrix<f64>>,
    /// One entry per parameter; `None` when unavailable.
    pub std_errors: Vec<Option<f64>>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n: usize,
    pub n_groups: usize,
    pub theta_pinned: bool,
    pub warnings: Vec<String>,
}

impl FrailtyFit {
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["constant".to_string()];
        names.extend(self.covariate_names.iter().cloned());
        names.push("ln_p".to_string());
        names.push("ln_theta".to_string());
        names
    }

    pub fn parameter_values(&self) -> Vec<f64> {
        let mut v = self.beta_aft.clone();
        v.push(self.ln_p);
        v.push(self.ln_theta);
        v
    }
}

fn check_condition(x: &DMatrix<f64>, names: &[String], limit: f64) -> Result<()> {
    // Constant non-intercept columns are degenerate regardless of scale.
    let mut offenders: Vec<String> = Vec::new();
    for j in 1..x.ncols() {
        let col = x.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            offenders.push(names[j - 1].clone());
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Collinear {
            condition: f64::INFINITY,
            columns: offenders,
        });
    }
    let svd = x.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond <= limit {
        return Ok(());
    }
    // Name columns nearly explained by the others.
    for j in 1..x.ncols() {
        let target = x.column(j).clone_owned();
        let others = x.select_columns(
            (0..x.ncols())
                .filter(|&c| c != j)
                .collect::<Vec<_>>()
                .iter(),
        );
        let svd = others.clone().svd(true, true);
        let tol = svd.singular_values.max() * 1e-12 * x.nrows() as f64;
        if let Ok(coef) = svd.solve(&target, tol) {
            let resid = &target - others * coef;
            let mean = target.sum() / target.len() as f64;
            let tss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
            if tss > 0.0 && resid.norm_squared() / tss < 1e-6 {
                offenders.push(names[j - 1].clone());
            }
        }
    }
    if offenders.is_empty() {
        offenders = names.to_vec();
    }
    Err(Error::Collinear {
        condition: cond,
        columns: offenders,
    })
}

/// Invert the negated Hessian into a covariance matrix. Near-singular
/// directions (flat ridges such as a degenerate frailty) are floored at a
/// tiny eigenvalue, which surfaces as an inflated standard error.
fn covariance_from_hessian(neg_hessian: &DMatrix<f64>) -> (Option<DMatrix<f64>>, Option<String>) {
    if let Some(chol) = nalgebra::Cholesky::new(neg_hessian.clone()) {
        return (Some(chol.inverse()), None);
    }
    let eig = nalgebra::SymmetricEigen::new(neg_hessian.clone());
    let max_eig = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if max_eig <= 0.0 {
        return (None, Some("hessian not negative definite".into()));
    }
    if eig.eigenvalues.iter().any(|&l| l < -1e-4 * max_eig) {
        return (None, Some("hessian indefinite at optimum".into()));
    }
    let floor = 1e-12 * max_eig.max(1.0);
    let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.max(floor)),
    ));
    let cov = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    (
        Some(cov),
        Some(
            "near-singular hessian: flat directions floored, their standard errors are inflated"
                .into(),
        ),
    )
}

pub fn fit_frailty_model(data: &SurvivalData, spec: &ModelSpec) -> Result<FrailtyFit> {
    fit_with_options(data, spec, &FitOptions::default())
}

pub fn fit_with_options(
    data: &SurvivalData,
    spec: &ModelSpec,
    opts: &FitOptions,
) -> Result<FrailtyFit> {
    let sub = data.select(&spec.covariates)?;
    let design = sub.design();
    check_condition(&design, sub.covariate_names(), opts.condition_limit)?;

    let k = sub.covariate_names.len() + 1;
    let pinned = sub.n_groups() < 2;
    let mut warnings = Vec::new();
    if pinned {
        warnings.push(
            "single group: frailty variance unidentified, ln_theta pinned at the floor".into(),
        );
    }
    let n_free = if pinned { k + 1 } else { k + 2 };

    let objective = |v: &DVector<f64>| -> f64 {
        let beta: Vec<f64> = v.iter().take(k).copied().collect();
        let ln_p = v[k];
        let ln_theta = if pinned {
            opts.ln_theta_floor
        } else {
            v[k + 1]
        };
        marginal_loglik(&beta, ln_p, ln_theta, &sub)
    };

    let mean_duration =
        sub.spells.iter().map(|s| s.duration).sum::<f64>() / sub.spells.len() as f64;
    let mut start = DVector::zeros(n_free);
    start[0] = mean_duration.ln();
    if !pinned {
        start[k + 1] = -1.0;
    }

    let max_opts = MaximizeOptions {
        max_iterations: opts.max_iterations,
        floor: (!pinned).then_some(Floor {
            index: k + 1,
            min: opts.ln_theta_floor,
        }),
        ..Default::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.restart_seed);
    let mut best: Option<optim::MaximizeResult> = None;
    for attempt in 0..=opts.restarts {
        let mut x0 = start.clone();
        if attempt > 0 {
            for v in x0.iter_mut() {
                *v += opts.restart_scale * standard_normal(&mut rng);
            }
        }
        let res = optim::maximize(&objective, x0, &max_opts);
        let better = match &best {
            None => true,
            Some(b) => {
                (res.converged && !b.converged)
                    || (res.converged == b.converged && res.value > b.value)
            }
        };
        if better {
            best = Some(res);
        }
    }
    let best = best.expect("at least one attempt");
    if !best.converged {
        warnings.push(format!(
            "no attempt converged within {} iterations",
            opts.max_iterations
        ));
    }

    let beta_aft: Vec<f64> = best.x.iter().take(k).copied().collect();
    let ln_p = best.x[k];
    let ln_theta = if pinned {
        opts.ln_theta_floor
    } else {
        best.x[k + 1]
    };

    let neg_hessian = -optim::hessian_fd(&objective, &best.x);
    let (cov_free, cov_warning) = covariance_from_hessian(&neg_hessian);
    if let Some(w) = cov_warning {
        warnings.push(w);
    }

    // Expand to the full parameter layout (covariance row/col for a pinned
    // ln_theta stays zero, its standard error unavailable).
    let total = k + 2;
    let (covariance, std_errors) = match cov_free {
        None => (None, vec![None; total]),
        Some(cf) => {
            let mut cov = DMatrix::zeros(total, total);
            for i in 0..n_free {
                for j in 0..n_free {
                    cov[(i, j)] = cf[(i, j)];
                }
            }
            let se: Vec<Option<f64>> = (0..total)
                .map(|i| {
                    if pinned && i == total - 1 {
                        None
                    } else {
                        let v = cov[(i, i)];
                        (v.is_finite() && v >= 0.0).then(|| v.sqrt())
                    }
                })
                .collect();
            (Some(cov), se)
        }
    };

    Ok(FrailtyFit {
        label: spec.label.clone(),
        covariate_names: sub.covariate_names.clone(),
        beta_aft,
        ln_p,
        ln_theta,
        covariance,
        std_errors,
        log_likelihood: best.value,
        converged: best.converged,
        iterations: best.iterations,
        n: sub.n(),
        n_groups: sub.n_groups(),
        theta_pinned: pinned,
        warnings,
    })
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Likelihood-ratio statistic 2*(LL_full - LL_null) and its degrees of
/// freedom (the parameter-count difference).
pub fn lr_test(full: &FrailtyFit, null: &FrailtyFit) -> Result<(f64, usize)> {
    let nested = null
        .covariate_names
        .iter()
        .all(|c| full.covariate_names.contains(c));
    if !nested || full.n != null.n {
        return Err(Error::NotNested {
            full: full.label.clone(),
            null: null.label.clone(),
        });
    }
    let statistic = 2.0 * (full.log_likelihood - null.log_likelihood);
    let df = full.covariate_names.len() - null.covariate_names.len();
    Ok((statistic, df))
}

/// exp(coefficient): the multiplicative effect on expected duration in the
/// AFT parameterization.
pub fn time_ratio(coefficient: f64) -> f64 {
    coefficient.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_spell_data(duration: f64) -> SurvivalData {
        SurvivalData::new(
            vec![],
            vec![SurvivalSpell {
                group: "g1".into(),
                duration,
                covariates: vec![],
            }],
        )
        .unwrap()
    }

    #[test]
    fn laplace_transform_at_zero_is_one() {
        for theta in [1e-8, 0.1, 0.5, 2.0] {
            assert_eq!(ig_log_laplace(theta, 0.0), 0.0);
            assert_eq!(ig_log_laplace_deriv(0, theta, 0.0), 0.0);
        }
    }

    #[test]
    fn laplace_transform_theta_zero_limit_is_exponential() {
        for s in [0.01, 0.5, 1.0, 5.0, 20.0] {
            assert!((ig_log_laplace(1e-12, s) - (-s)).abs() < 1e-8);
        }
    }

    #[test]
    fn first_derivative_matches_closed_form() {
        // -L'(s) = L(s)/u.
        for (theta, s) in [(0.3f64, 0.7f64), (1.2, 2.5), (0.05, 10.0)] {
            let u = (1.0 + 2.0 * theta * s).sqrt();
            let expected = ig_log_laplace(theta, s) - u.ln();
            let got = ig_log_laplace_deriv(1, theta, s);
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_matches_closed_form() {
        // L''(s) = (u^-2 + theta u^-3) L(s).
        for (theta, s) in [(0.3f64, 0.7f64), (1.2, 2.5)] {
            let u = (1.0 + 2.0 * theta * s).sqrt();
            let expected = ig_log_laplace(theta, s) + (u.powi(-2) + theta * u.powi(-3)).ln();
            let got = ig_log_laplace_deriv(2, theta, s);
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_exponential_single_spell() {
        // t = 1, intercept 0, p = 1, theta -> 0: hazard 1, survivor e^-1.
        let data = single_spell_data(1.0);
        let ll = marginal_loglik(&[0.0], 0.0, -30.0, &data);
        assert!((ll - (-1.0)).abs() < 1e-6);
    }

    #[test]
    fn theta_zero_limit_matches_no_frailty_weibull() {
        let durations = [1.3, 0.7, 2.4, 3.1, 0.9, 1.8];
        let covs = [0.5, -0.2, 1.0, -1.3, 0.1, 0.7];
        let spells: Vec<SurvivalSpell> = durations
            .iter()
            .zip(&covs)
            .enumerate()
            .map(|(i, (&t, &x))| SurvivalSpell {
                group: format!("g{i}"),
                duration: t,
                covariates: vec![x],
            })
            .collect();
        let data = SurvivalData::new(vec!["x".into()], spells).unwrap();
        let beta = [0.4, -0.6];
        let (ln_p, p) = (0.3, 0.3f64.exp());

        // Independent no-frailty Weibull AFT log-likelihood.
        let mut expected = 0.0;
        for (t, x) in durations.iter().zip(&covs) {
            let xb_tilde = -p * (beta[0] + beta[1] * x);
            expected += ln_p + (p - 1.0) * t.ln() + xb_tilde - t.powf(p) * xb_tilde.exp();
        }
        let got = marginal_loglik(&beta, ln_p, (1e-12f64).ln(), &data);
        assert!((got - expected).abs() < 1e-6);
    }

    #[test]
    fn extreme_parameters_signal_non_finite() {
        let data = single_spell_data(5.0);
        let ll = marginal_loglik(&[-500.0], 5.0, 0.0, &data);
        assert!(!ll.is_finite());
    }

    #[test]
    fn intercept_only_exponential_mle() {
        // i.i.d. exponential-like durations, one group per spell: the MLE
        // has ln p ~ 0 and constant ~ ln(mean).
        let durations = [0.2, 1.5, 0.7, 2.9, 0.4, 1.1, 0.9, 2.2, 0.6, 1.6];
        let spells: Vec<SurvivalSpell> = durations
            .iter()
            .enumerate()
            .map(|(i, &t)| SurvivalSpell {
                group: format!("g{i}"),
                duration: t,
                covariates: vec![],
            })
            .collect();
        let data = SurvivalData::new(vec![], spells).unwrap();
        let fit = fit_frailty_model(&data, &ModelSpec::new("M1", vec![])).unwrap();
        assert!(fit.converged);

        // Exponential MLE oracle: profile out the rate at p = 1.
        let mean = durations.iter().sum::<f64>() / durations.len() as f64;
        // Weibull MLE via direct 2-parameter grid refinement.
        let nll = |c: f64, lnp: f64| -> f64 {
            let p = lnp.exp();
            -durations
                .iter()
                .map(|t| lnp + (p - 1.0) * t.ln() - p * c - t.powf(p) * (-p * c).exp())
                .sum::<f64>()
        };
        let mut best = (mean.ln(), 0.0);
        let mut step = 0.5;
        for _ in 0..60 {
            let (c0, l0) = best;
            let mut improved = best;
            let mut best_val = nll(c0, l0);
            for dc in [-1.0, 0.0, 1.0] {
                for dl in [-1.0, 0.0, 1.0] {
                    let cand = (c0 + dc * step, l0 + dl * step);
                    let v = nll(cand.0, cand.1);
                    if v < best_val {
                        best_val = v;
                        improved = cand;
                    }
                }
            }
            if improved == best {
                step *= 0.5;
            }
            best = improved;
        }
        assert!(
            (fit.beta_aft[0] - best.0).abs() < 1e-3,
            "constant {} vs oracle {}",
            fit.beta_aft[0],
            best.1
        );
        assert!((fit.ln_p - best.1).abs() < 1e-3);
        assert!(!fit.theta_pinned);
    }

    #[test]
    fn collinear_design_is_rejected_naming_columns() {
        let spells: Vec<SurvivalSpell> = (0..12)
            .map(|i| {
                let x = (i % 5) as f64;
                SurvivalSpell {
                    group: format!("g{}", i % 3),
                    duration: 1.0 + i as f64 * 0.2,
                    covariates: vec![x, 2.0 * x],
                }
            })
            .collect();
        let data = SurvivalData::new(vec!["a".into(), "b".into()], spells).unwrap();
        let spec = ModelSpec::new("M", vec!["a".into(), "b".into()]);
        match fit_frailty_model(&data, &spec) {
            Err(Error::Collinear { columns, .. }) => {
                assert!(columns.contains(&"a".to_string()));
                assert!(columns.contains(&"b".to_string()));
            }
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn constant_dummy_column_is_rejected() {
        let spells: Vec<SurvivalSpell> = (0..8)
            .map(|i| SurvivalSpell {
                group: format!("g{}", i % 2),
                duration: 1.0 + i as f64,
                covariates: vec![0.0],
            })
            .collect();
        let data = SurvivalData::new(vec!["dead".into()], spells).unwrap();
        match fit_frailty_model(&data, &ModelSpec::new("M", vec!["dead".into()])) {
            Err(Error::Collinear { columns, .. }) => assert_eq!(columns, vec!["dead".to_string()]),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn lr_statistic_and_df() {
        let fit = |label: &str, names: Vec<String>, ll: f64| FrailtyFit {
            label: label.into(),
            covariate_names: names,
            beta_aft: vec![0.0],
            ln_p: 0.0,
            ln_theta: -1.0,
            covariance: None,
            std_errors: vec![],
            log_likelihood: ll,
            converged: true,
            iterations: 1,
            n: 72,
            n_groups: 18,
            theta_pinned: false,
            warnings: vec![],
        };
        let null = fit("M1", vec![], -96.0608);
        let full = fit("M3", vec!["house_bust".into()], -92.6078);
        let (stat, df) = lr_test(&full, &null).unwrap();
        assert!((stat - 6.9060).abs() < 1e-10);
        assert_eq!(df, 1);

        let (zero, _) = lr_test(&null, &null).unwrap();
        assert_eq!(zero, 0.0);

        let other = fit("M2", vec!["credit_bust".into()], -96.0216);
        assert!(matches!(
            lr_test(&other, &full),
            Err(Error::NotNested { .. })
        ));
    }

    #[test]
    fn time_ratio_examples() {
        assert!((time_ratio(0.6155) - 1.8506).abs() < 5e-4);
        assert!((time_ratio(0.6267) - 1.8714).abs() < 5e-4);
        assert_eq!(time_ratio(0.0), 1.0);
    }

    #[test]
    fn single_group_pins_theta() {
        let spells: Vec<SurvivalSpell> = [1.2, 0.8, 2.0, 1.4]
            .iter()
            .map(|&t| SurvivalSpell {
                group: "only".into(),
                duration: t,
                covariates: vec![],
            })
            .collect();
        let data = SurvivalData::new(vec![], spells).unwrap();
        let fit = fit_frailty_model(&data, &ModelSpec::new("M1", vec![])).unwrap();
        assert!(fit.theta_pinned);
        assert_eq!(fit.ln_theta, -20.0);
        assert!(fit.std_errors.last().unwrap().is_none());
        assert!(!fit.warnings.is_empty());
    }
}
