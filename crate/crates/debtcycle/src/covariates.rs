//! Event-window growth covariates, PCA controls, and orthogonalized dummies.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assoc::CovariateProvider;
use crate::error::{Error, Result};
use crate::panel::{Panel, QuarterIndex, QuarterlySeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowDirection {
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowStatistic {
    /// Arithmetic mean of quarter-on-quarter percentage changes.
    PctChange,
    /// Arithmetic mean of levels (used for the account balance).
    Level,
}

/// An event-window covariate: n quarters of a variable before or after the
/// turning point that starts a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Output covariate name.
    pub name: String,
    /// Panel variable the window reads.
    pub variable: String,
    pub n_quarters: usize,
    pub direction: WindowDirection,
    pub statistic: WindowStatistic,
}

impl WindowSpec {
    pub fn new(
        name: impl Into<String>,
        variable: impl Into<String>,
        n_quarters: usize,
        direction: WindowDirection,
        statistic: WindowStatistic,
    ) -> Result<Self> {
        if n_quarters < 1 {
            return Err(Error::InvalidRules("window length must be >= 1".into()));
        }
        Ok(Self {
            name: name.into(),
            variable: variable.into(),
            n_quarters,
            direction,
            statistic,
        })
    }

    /// Default windows for the financial growth covariates: two-quarter
    /// average growth before the event.
    pub fn growth_defaults(credit_variable: &str, house_variable: &str) -> Vec<WindowSpec> {
        vec![
            WindowSpec::new(
                "credit_growth",
                credit_variable,
                2,
                WindowDirection::Before,
                WindowStatistic::PctChange,
            )
            .expect("valid built-in spec"),
            WindowSpec::new(
                "house_growth",
                house_variable,
                2,
                WindowDirection::Before,
                WindowStatistic::PctChange,
            )
            .expect("valid built-in spec"),
        ]
    }

    /// Default windows for the six macro controls. Inflation is averaged
    /// after the event rather than before; the account balance enters in
    /// levels.
    pub fn macro_defaults() -> Vec<WindowSpec> {
        let spec = |name: &str, var: &str, n, dir, stat| {
            WindowSpec::new(name, var, n, dir, stat).expect("valid built-in spec")
        };
        vec![
            spec(
                "gdp_growth",
                "gdp",
                1,
                WindowDirection::Before,
                WindowStatistic::PctChange,
            ),
            spec(
                "money_growth",
                "money",
                2,
                WindowDirection::Before,
                WindowStatistic::PctChange,
            ),
            spec(
                "inflation",
                "cpi",
                2,
                WindowDirection::After,
                WindowStatistic::PctChange,
            ),
            spec(
                "reer_growth",
                "reer",
                2,
                WindowDirection::Before,
                WindowStatistic::PctChange,
            ),
            spec(
                "balance",
                "balance",
                2,
                WindowDirection::Before,
                WindowStatistic::Level,
            ),
            spec(
                "oil_growth",
                "oil",
                3,
                WindowDirection::Before,
                WindowStatistic::PctChange,
            ),
        ]
    }
}

/// Average the window statistic around event quarter `t`.
///
/// `Before` averages the `n` percentage changes ending at `t` (changes into
/// quarters `t-n+1 ..= t`); `After` averages the `n` changes following `t`.
/// Level windows average the levels at `t-n+1 ..= t` (Before) or
/// `t+1 ..= t+n` (After).
pub fn event_window_average(
    series: &QuarterlySeries,
    t: QuarterIndex,
    spec: &WindowSpec,
) -> Result<f64> {
    let n = spec.n_quarters as i64;
    let (from, to) = match (spec.direction, spec.statistic) {
        (WindowDirection::Before, WindowStatistic::PctChange) => (t.offset(-n), t),
        (WindowDirection::After, WindowStatistic::PctChange) => (t, t.offset(n)),
        (WindowDirection::Before, WindowStatistic::Level) => (t.offset(-(n - 1)), t),
        (WindowDirection::After, WindowStatistic::Level) => (t.offset(1), t.offset(n)),
    };
    let unavailable = || Error::CovariateWindow {
        name: spec.name.clone(),
        country: series.country.clone(),
        from,
        to,
    };
    let first = series.offset_of(from).ok_or_else(unavailable)?;
    let last = series.offset_of(to).ok_or_else(unavailable)?;
    let window = &series.values[first..=last];
    match spec.statistic {
        WindowStatistic::Level => Ok(window.iter().sum::<f64>() / window.len() as f64),
        WindowStatistic::PctChange => {
            let mut changes = Vec::with_capacity(window.len() - 1);
            for pair in window.windows(2) {
                if pair[0] == 0.0 {
                    return Err(Error::ZeroDenominator {
                        country: series.country.clone(),
                        variable: series.variable.clone(),
                        quarter: from,
                    });
                }
                changes.push(100.0 * (pair[1] - pair[0]) / pair[0]);
            }
            Ok(changes.iter().sum::<f64>() / changes.len() as f64)
        }
    }
}

/// Window-spec covariate provider backed by a panel.
pub struct PanelWindows<'a> {
    panel: &'a Panel,
    specs: Vec<WindowSpec>,
}

impl<'a> PanelWindows<'a> {
    pub fn new(panel: &'a Panel, specs: Vec<WindowSpec>) -> Self {
        Self { panel, specs }
    }
}

impl CovariateProvider for PanelWindows<'_> {
    fn covariates(&self, country: &str, event: QuarterIndex) -> Result<Vec<(String, f64)>> {
        let mut out = Vec::with_capacity(self.specs.len());
        for spec in &self.specs {
            let series =
                self.panel
                    .get(country, &spec.variable)
                    .ok_or_else(|| Error::CovariateWindow {
                        name: spec.name.clone(),
                        country: country.to_string(),
                        from: event,
                        to: event,
                    })?;
            out.push((
                spec.name.clone(),
                event_window_average(series, event, spec)?,
            ));
        }
        Ok(out)
    }
}

/// Principal components of standardized variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub variable_names: Vec<String>,
    /// Columns are orthonormal loading vectors, eigenvalue-descending.
    pub loadings: DMatrix<f64>,
    /// Rows are observations, columns component scores.
    pub scores: DMatrix<f64>,
    /// Eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Explained-variance fractions, descending; they sum to 1.
    pub fractions: Vec<f64>,
}

impl PcaResult {
    /// Cumulative explained-variance fraction of the first `k` components.
    pub fn top_fraction(&self, k: usize) -> f64 {
        self.fractions.iter().take(k).sum()
    }
}

/// PCA of the correlation matrix: variables are standardized to zero mean
/// and unit sample variance before the eigendecomposition, so heterogeneous
/// scales cannot dominate. Loading signs are normalized so the largest
///-magnitude entry of each column is positive.
pub fn pca(data: &DMatrix<f64>, variable_names: &[String]) -> Result<PcaResult> {
    let (n, m) = (data.nrows(), data.ncols());
    if n < 2 {
        return Err(Error::InvalidRules(format!(
            "pca needs >= 2 observations, got {n}"
        )));
    }
    assert_eq!(variable_names.len(), m, "one name per column");

    let mut standardized = data.clone();
    for j in 0..m {
        let col = data.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        if var <= 0.0 {
            return Err(Error::ConstantColumn(variable_names[j].clone()));
        }
        let sd = var.sqrt();
        for i in 0..n {
            standardized[(i, j)] = (data[(i, j)] - mean) / sd;
        }
    }

    let corr = standardized.transpose() * &standardized / (n as f64 - 1.0);
    let eig = nalgebra::SymmetricEigen::new(corr);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut loadings = DMatrix::zeros(m, m);
    let mut eigenvalues = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let dominant = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite loadings"))
            .map(|(i, _)| i)
            .expect("non-empty column");
        if col[dominant] < 0.0 {
            col.neg_mut();
        }
        loadings.set_column(dst, &col);
        eigenvalues.push(eig.eigenvalues[src].max(0.0));
    }

    let total: f64 = eigenvalues.iter().sum();
    let fractions = eigenvalues.iter().map(|l| l / total).collect();
    let scores = &standardized * &loadings;

    Ok(PcaResult {
        variable_names: variable_names.to_vec(),
        loadings,
        scores,
        eigenvalues,
        fractions,
    })
}

/// Residual of the OLS regression of `target` on an intercept plus
/// `regressors`; the residual has zero sample correlation with each
/// regressor column.
pub fn orthogonalize(target: &DVector<f64>, regressors: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = target.len();
    assert_eq!(regressors.nrows(), n, "row count mismatch");
    let k = regressors.ncols() + 1;
    let mut design = DMatrix::zeros(n, k);
    design.column_mut(0).fill(1.0);
    for j in 0..regressors.ncols() {
        design.set_column(j + 1, &regressors.column(j));
    }
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-12 * n.max(k) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < k {
        return Err(Error::RankDeficient { columns: vec![] });
    }
    let coef = svd
        .solve(target, tol)
        .map_err(|_| Error::RankDeficient { columns: vec![] })?;
    Ok(target - design * coef)
}

/// Convenience map from spell covariate rows to a matrix column order.
pub fn covariate_matrix(rows: &[Vec<(String, f64)>], names: &[String]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let mut out = DMatrix::zeros(n, names.len());
    for (i, row) in rows.iter().enumerate() {
        let lookup: BTreeMap<&str, f64> = row.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        for (j, name) in names.iter().enumerate() {
            out[(i, j)] = *lookup
                .get(name.as_str())
                .ok_or_else(|| Error::UnknownCovariate(name.clone()))?;
        }
    }
    Ok(out)
}
