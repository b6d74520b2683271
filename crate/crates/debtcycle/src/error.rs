//! Crate-wide error type.

use thiserror::Error;

use crate::panel::QuarterIndex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed quarter literal `{0}`: expected YYYYQn with n in 1..4")]
    QuarterParse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed value `{value}` for ({country}, {variable}) at {quarter}")]
    ValueParse {
        country: String,
        variable: String,
        quarter: String,
        value: String,
    },

    #[error("series ({country}, {variable}) has a gap at {gap}")]
    SeriesGap {
        country: String,
        variable: String,
        gap: QuarterIndex,
    },

    #[error("duplicate observation for ({country}, {variable}) at {quarter}")]
    DuplicateObservation {
        country: String,
        variable: String,
        quarter: QuarterIndex,
    },

    #[error("country `{0}` has no group label")]
    MissingGroup(String),

    #[error("zero value at {quarter} in ({country}, {variable}): percentage change undefined")]
    ZeroDenominator {
        country: String,
        variable: String,
        quarter: QuarterIndex,
    },

    #[error("series too short: {len} observations, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("invalid censoring rules: {0}")]
    InvalidRules(String),

    #[error("phase endpoints are outside the series")]
    PhaseOutOfRange,

    #[error("phase starts at zero value: amplitude undefined")]
    ZeroStartValue,

    #[error("constant column `{0}`: zero variance")]
    ConstantColumn(String),

    #[error("rank-deficient regressors{}", fmt_columns(.columns))]
    RankDeficient { columns: Vec<String> },

    #[error("near-collinear design (condition number {condition:.3e}){}", fmt_columns(.columns))]
    Collinear {
        condition: f64,
        columns: Vec<String>,
    },

    #[error("covariate `{name}` window [{from}, {to}] outside series for {country}")]
    CovariateWindow {
        name: String,
        country: String,
        from: QuarterIndex,
        to: QuarterIndex,
    },

    #[error("unknown covariate `{0}` in model spec")]
    UnknownCovariate(String),

    #[error("model `{null}` is not nested in `{full}`")]
    NotNested { full: String, null: String },

    #[error("survival data invalid: {0}")]
    InvalidSurvivalData(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("invalid turning schedule: {0}")]
    InvalidSchedule(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn fmt_columns(columns: &[String]) -> String {
    if columns.is_empty() {
        String::new()
    } else {
        format!(": offending columns [{}]", columns.join(", "))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
