//! Run configuration: a flat key=value file overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use debtcycle::assoc::{AssociationWindow, FinancialCycle, InteractionSpec};
use debtcycle::covariates::{WindowDirection, WindowSpec, WindowStatistic};
use debtcycle::dating::{CensoringRules, Horizon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Md,
    Json,
}

impl TableFormat {
    fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "md" => Ok(TableFormat::Md),
            "json" => Ok(TableFormat::Json),
            other => bail!("unknown format `{other}` (expected csv, md or json)"),
        }
    }
}

/// Fully resolved configuration for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub groups: PathBuf,
    pub horizon: Horizon,
    pub rules: CensoringRules,
    pub assoc_window: i64,
    /// Restrict survival/amplitude fits to one economy group, or `all`
    /// for the pooled sample only; absent fits each group plus the pool.
    pub group_filter: Option<String>,
    pub ladder: Vec<String>,
    /// Not serialized into the manifest: the bundle location is not part
    /// of its identity.
    #[serde(skip)]
    pub out: PathBuf,
    pub format: TableFormat,
    pub seed: u64,
    pub debt_variable: String,
    pub credit_variable: String,
    pub house_variable: String,
    pub equity_variable: String,
    pub growth_windows: Vec<WindowSpec>,
    pub macro_windows: Vec<WindowSpec>,
    pub interactions: Vec<InteractionSpec>,
}

pub const DEFAULT_LADDER: [&str; 8] = ["M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"];

/// Flag-level overrides shared by the data-driven subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// Flat key=value configuration file; flags win over file entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Long-format panel CSV (country,quarter,variable,value).
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Country-to-group CSV (country,group).
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// short or medium; binds censoring rules and the association window.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Economy group label, or `all` for the pooled sample only.
    #[arg(long)]
    pub group: Option<String>,
    /// Extremum comparison window in quarters.
    #[arg(long)]
    pub window: Option<usize>,
    /// Minimum phase length in quarters.
    #[arg(long)]
    pub min_phase: Option<i64>,
    /// Minimum cycle length in quarters.
    #[arg(long)]
    pub min_cycle: Option<i64>,
    /// Association window in quarters.
    #[arg(long)]
    pub assoc_window: Option<i64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table format: csv, md or json (full-precision JSON fit dumps are
    /// always written).
    #[arg(long)]
    pub format: Option<String>,
    /// Seed recorded in the manifest and used by any simulation stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated model ladder subset, e.g. M1,M5.
    #[arg(long)]
    pub ladder: Option<String>,
}

fn parse_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            );
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// `variable:before|after:n:pct|level` window syntax.
fn parse_window_spec(name: &str, text: &str) -> Result<WindowSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 4 {
        bail!("covariate `{name}`: expected variable:before|after:n:pct|level, got `{text}`");
    }
    let direction = match parts[1].to_ascii_lowercase().as_str() {
        "before" => WindowDirection::Before,
        "after" => WindowDirection::After,
        other => bail!("covariate `{name}`: unknown direction `{other}`"),
    };
    let n: usize = parts[2]
        .parse()
        .with_context(|| format!("covariate `{name}`: bad window length `{}`", parts[2]))?;
    let statistic = match parts[3].to_ascii_lowercase().as_str() {
        "pct" => WindowStatistic::PctChange,
        "level" => WindowStatistic::Level,
        other => bail!("covariate `{name}`: unknown statistic `{other}`"),
    };
    Ok(WindowSpec::new(name, parts[0], n, direction, statistic)?)
}

fn parse_interactions(text: &str) -> Result<Vec<InteractionSpec>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((cycle, group)) = item.split_once(':') else {
            bail!("interaction `{item}`: expected cycle:group");
        };
        let cycle = match cycle.to_ascii_lowercase().as_str() {
            "credit" => FinancialCycle::Credit,
            "house" => FinancialCycle::House,
            "equity" => FinancialCycle::Equity,
            other => bail!("interaction `{item}`: unknown cycle `{other}`"),
        };
        out.push(InteractionSpec {
            cycle,
            group: group.to_string(),
        });
    }
    Ok(out)
}

impl RunConfig {
    /// Resolve precedence: flags > config file > defaults.
    pub fn resolve(args: &CommonArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => parse_key_values(path)?,
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).cloned();

        let horizon: Horizon = args
            .horizon
            .clone()
            .or_else(|| get("horizon"))
            .unwrap_or_else(|| "short".to_string())
            .parse()?;
        let mut rules = horizon.rules();
        if let Some(w) = args
            .window
            .or_else(|| get("window").and_then(|v| v.parse().ok()))
        {
            rules.window = w;
        }
        if let Some(m) = args
            .min_phase
            .or_else(|| get("min_phase").and_then(|v| v.parse().ok()))
        {
            rules.min_phase = m;
        }
        if let Some(m) = args
            .min_cycle
            .or_else(|| get("min_cycle").and_then(|v| v.parse().ok()))
        {
            rules.min_cycle = m;
        }
        rules.validate()?;
        let assoc_window = args
            .assoc_window
            .or_else(|| get("assoc_window").and_then(|v| v.parse().ok()))
            .unwrap_or_else(|| horizon.association_window());
        AssociationWindow::new(assoc_window)?;

        let panel = args
            .panel
            .clone()
            .or_else(|| get("panel").map(PathBuf::from))
            .context("no panel path: pass --panel or set `panel` in the config file")?;
        let groups = args
            .groups
            .clone()
            .or_else(|| get("groups").map(PathBuf::from))
            .context("no group-map path: pass --groups or set `groups` in the config file")?;

        let group_filter = args.group.clone().or_else(|| get("group"));
        let ladder: Vec<String> = args
            .ladder
            .clone()
            .or_else(|| get("ladder"))
            .map(|s| {
                s.split(',')
                    .map(|m| m.trim().to_string())
                    .filter(|m| !m.is_empty())
                    .collect()
            })
            .unwrap_or_else(|| DEFAULT_LADDER.iter().map(|s| s.to_string()).collect());
        for label in &ladder {
            if !DEFAULT_LADDER.contains(&label.as_str()) {
                bail!("unknown ladder model `{label}` (expected M1..M8)");
            }
        }

        let out = args
            .out
            .clone()
            .or_else(|| get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let format = TableFormat::parse(
            &args
                .format
                .clone()
                .or_else(|| get("format"))
                .unwrap_or_else(|| "csv".to_string()),
        )?;
        let seed = args
            .seed
            .or_else(|| get("seed").and_then(|v| v.parse().ok()))
            .unwrap_or(0);

        let variable = |key: &str, default: &str| -> String {
            get(key).unwrap_or_else(|| default.to_string())
        };
        let debt_variable = variable("debt_variable", "debt");
        let credit_variable = variable("credit_variable", "credit");
        let house_variable = variable("house_variable", "house");
        let equity_variable = variable("equity_variable", "equity");

        let mut growth_windows = Vec::new();
        for spec in WindowSpec::growth_defaults(&credit_variable, &house_variable) {
            let spec = match get(&format!("covariate.{}", spec.name)) {
                Some(text) => parse_window_spec(&spec.name, &text)?,
                None => spec,
            };
            growth_windows.push(spec);
        }
        // Extra covariates may be declared with covariate.<name> keys.
        for (key, value) in &file {
            if let Some(name) = key.strip_prefix("covariate.") {
                if !growth_windows.iter().any(|w| w.name == name) {
                    growth_windows.push(parse_window_spec(name, value)?);
                }
            }
        }

        let mut macro_windows = Vec::new();
        for spec in WindowSpec::macro_defaults() {
            let spec = match get(&format!("macro.{}", spec.name)) {
                Some(text) => parse_window_spec(&spec.name, &text)?,
                None => spec,
            };
            macro_windows.push(spec);
        }

        let interactions = match get("interaction") {
            Some(text) => parse_interactions(&text)?,
            None => Vec::new(),
        };

        Ok(RunConfig {
            panel,
            groups,
            horizon,
            rules,
            assoc_window,
            group_filter,
            ladder,
            out,
            format,
            seed,
            debt_variable,
            credit_variable,
            house_variable,
            equity_variable,
            growth_windows,
            macro_windows,
            interactions,
        })
    }
}
