//! Command-line front end: dates cycles, builds spell datasets, fits the
//! duration and amplitude models, and emits report bundles.

mod config;
mod pipeline;
mod sim_panel;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::{CommonArgs, RunConfig};
use pipeline::OutputWriter;

#[derive(Parser)]
#[command(
    name = "debtcycle",
    version,
    about = "Turning-point dating and duration/amplitude models for quarterly debt and financial cycles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Date turning points and phases for every (country, variable) series.
    DateCycles(CommonArgs),
    /// Phase feature summaries and conditional duration means.
    Stats(CommonArgs),
    /// Build spell-level datasets with association dummies and covariates.
    Associate(CommonArgs),
    /// Fit the Weibull shared-frailty duration ladder.
    Survival(CommonArgs),
    /// Fit the fixed-effects amplitude ladder.
    Amplitude(CommonArgs),
    /// PCA-control and orthogonalized-dummy robustness fits.
    Robustness(CommonArgs),
    /// Generate synthetic inputs (a quarterly panel or a duration dataset).
    Simulate(SimulateArgs),
    /// Run every stage and emit the full report bundle.
    RunAll(CommonArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// What to generate: `panel` or `durations`.
    #[arg(long, default_value = "panel")]
    what: String,
    #[arg(long, default_value = "sim")]
    out: std::path::PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Countries in a simulated panel.
    #[arg(long, default_value_t = 8)]
    countries: usize,
    /// Approximate series length in quarters.
    #[arg(long, default_value_t = 112)]
    length: usize,
    /// Frailty groups in a simulated duration dataset.
    #[arg(long, default_value_t = 50)]
    sim_groups: usize,
    /// Spells per group.
    #[arg(long, default_value_t = 6)]
    spells_per_group: usize,
    /// True AFT coefficients, intercept first, comma-separated.
    #[arg(long, default_value = "1.0,0.5")]
    beta: String,
    /// True Weibull shape.
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    /// True frailty variance.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::DateCycles(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = OutputWriter::new(&cfg.out, cfg.format)?;
            let panel = pipeline::load(&cfg).context("stage load failed")?;
            let dated = pipeline::date_all(&cfg, &panel).context("stage date-cycles failed")?;
            pipeline::stage_date_cycles(&dated, &out).context("stage date-cycles failed")?;
            pipeline::write_manifest(&cfg, vec![], &out)?;
        }
        Command::Stats(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = OutputWriter::new(&cfg.out, cfg.format)?;
            let panel = pipeline::load(&cfg).context("stage load failed")?;
            let dated = pipeline::date_all(&cfg, &panel).context("stage date-cycles failed")?;
            let spells =
                pipeline::build_spells(&cfg, &panel, &dated).context("stage associate failed")?;
            pipeline::stage_stats(&spells, &out).context("stage stats failed")?;
            pipeline::write_manifest(&cfg, vec![], &out)?;
        }
        Command::Associate(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = OutputWriter::new(&cfg.out, cfg.format)?;
            let panel = pipeline::load(&cfg).context("stage load failed")?;
            let dated = pipeline::date_all(&cfg, &panel).context("stage date-cycles failed")?;
            let spells =
                pipeline::build_spells(&cfg, &panel, &dated).context("stage associate failed")?;
            pipeline::stage_associate(&spells, &out).context("stage associate failed")?;
            pipeline::write_manifest(&cfg, vec![], &out)?;
        }
        Command::Survival(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = OutputWriter::new(&cfg.out, cfg.format)?;
            let panel = pipeline::load(&cfg).context("stage load failed")?;
            let dated = pipeline::date_all(&cfg, &panel).context("stage date-cycles failed")?;
            let spells =
                pipeline::build_spells(&cfg, &panel, &dated).context("stage associate failed")?;
            pipeline::stage_survival(&cfg, &panel, &spells, &out)
                .context("stage survival failed")?;
            pipeline::write_manifest(&cfg, vec![], &out)?;
        }
        Command::Amplitude(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = OutputWriter::new(&cfg.out, cfg.format)?;
            let panel = pipeline::load(&cfg).context("stage load failed")?;
            let dated = pipeline::date_all(&cfg, &panel).context("stage date-cycles failed")?;
            let spells =
                pipeline::build_spells(&cfg, &panel, &dated).context("stage associate failed")?;
            pipeline::stage_amplitude(&cfg, &panel, &spells, &out)
                .context("stage amplitude failed")?;
            pipeline::write_manifest(&cfg, vec![], &out)?;
        }
        Command::Robustness(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = OutputWriter::new(&cfg.out, cfg.format)?;
            let panel = pipeline::load(&cfg).context("stage load failed")?;
            if !pipeline::macro_variables_present(&cfg, &panel) {
                bail!("stage robustness failed: configured macro variables missing from panel");
            }
            let dated = pipeline::date_all(&cfg, &panel).context("stage date-cycles failed")?;
            let spells =
                pipeline::build_spells(&cfg, &panel, &dated).context("stage associate failed")?;
            pipeline::stage_robustness(&cfg, &panel, &spells, &out)
                .context("stage robustness failed")?;
            pipeline::write_manifest(&cfg, vec![], &out)?;
        }
        Command::Simulate(args) => simulate(&args)?,
        Command::RunAll(args) => {
            let cfg = RunConfig::resolve(&args)?;
            pipeline::run_all(&cfg)?;
        }
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    match args.what.as_str() {
        "panel" => {
            let cfg = sim_panel::SimPanelConfig {
                seed: args.seed,
                countries: args.countries,
                length: args.length,
            };
            let panel = sim_panel::simulate_panel(&cfg)?;
            std::fs::write(args.out.join("panel.csv"), sim_panel::panel_csv(&panel))?;
            std::fs::write(args.out.join("groups.csv"), sim_panel::groups_csv(&panel))?;
            let manifest = serde_json::json!({
                "what": "panel",
                "seed": args.seed,
                "countries": args.countries,
                "length": args.length,
                "rng_algorithm": debtcycle::simulate::RNG_ALGORITHM,
                "version": env!("CARGO_PKG_VERSION"),
            });
            std::fs::write(
                args.out.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)? + "\n",
            )?;
        }
        "durations" => {
            let beta: Vec<f64> = args
                .beta
                .split(',')
                .map(|v| v.trim().parse().context("bad --beta entry"))
                .collect::<Result<_>>()?;
            let covariates = beta.len() - 1;
            let cfg = debtcycle::simulate::SimConfig {
                seed: args.seed,
                groups: args.sim_groups,
                spells_per_group: debtcycle::simulate::SpellCount::Fixed(args.spells_per_group),
                beta_aft: beta.clone(),
                p: args.p,
                theta: args.theta,
                covariates: debtcycle::simulate::CovariateLaw::StandardNormal(covariates),
            };
            let data = debtcycle::simulate::simulate_frailty_durations(&cfg)?;
            let mut csv = String::from("group,duration");
            for name in data.covariate_names() {
                csv.push(',');
                csv.push_str(name);
            }
            csv.push('\n');
            for spell in data.spells() {
                csv.push_str(&format!("{},{:.10}", spell.group, spell.duration));
                for v in &spell.covariates {
                    csv.push_str(&format!(",{v:.10}"));
                }
                csv.push('\n');
            }
            std::fs::write(args.out.join("durations.csv"), csv)?;
            let manifest = serde_json::json!({
                "what": "durations",
                "config": cfg,
                "rng_algorithm": debtcycle::simulate::RNG_ALGORITHM,
                "version": env!("CARGO_PKG_VERSION"),
            });
            std::fs::write(
                args.out.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)? + "\n",
            )?;
        }
        other => bail!("unknown --what `{other}` (expected panel or durations)"),
    }
    Ok(())
}
