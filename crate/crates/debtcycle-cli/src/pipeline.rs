//! Pipeline stages behind the subcommands. Every stage is a pure function
//! of the loaded panel and the resolved configuration, so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use debtcycle::assoc::{
    build_spell_dataset, write_spells_csv, AssociationWindow, CountryPhase, CovariateProvider,
    DropReport, FinancialCycle, NoCovariates, SpellRecord,
};
use debtcycle::covariates::{covariate_matrix, orthogonalize, pca, PanelWindows, WindowSpec};
use debtcycle::dating::{
    censor_turning_points, extract_phases, find_candidate_extrema, Phase, PhaseKind, TurningPoint,
};
use debtcycle::fe::fit_fixed_effects;
use debtcycle::panel::{load_panel, Panel, QuarterlySeries};
use debtcycle::report::{
    render_fe_fits_csv, render_fe_table_md, render_group_summary_csv, render_group_summary_md,
    render_pca_summary_md, render_survival_fits_csv, render_survival_table_md, FeFitSummary,
    PcaSummary, SurvivalFitSummary,
};
use debtcycle::stats::{conditional_duration_means, phase_metrics, summarize};
use debtcycle::survival::{fit_frailty_model, FrailtyFit, ModelSpec, SurvivalData, SurvivalSpell};

use crate::config::{RunConfig, TableFormat};

pub const KINDS: [PhaseKind; 2] = [PhaseKind::Expansion, PhaseKind::Contraction];

pub fn load(cfg: &RunConfig) -> Result<Panel> {
    let panel_file = std::fs::File::open(&cfg.panel)
        .with_context(|| format!("opening panel {}", cfg.panel.display()))?;
    let groups_file = std::fs::File::open(&cfg.groups)
        .with_context(|| format!("opening group map {}", cfg.groups.display()))?;
    Ok(load_panel(panel_file, groups_file)?)
}

/// Dated turning points and phases for one (country, variable) series.
pub struct SeriesDating {
    pub country: String,
    pub variable: String,
    pub n_candidates: usize,
    pub points: Vec<TurningPoint>,
    pub phases: Vec<Phase>,
    /// Quarters discarded before the first / after the last turning point.
    pub leading_dropped: i64,
    pub trailing_dropped: i64,
    pub skipped: Option<String>,
}

pub struct DatedCycles {
    pub per_series: Vec<SeriesDating>,
    pub debt_phases: Vec<CountryPhase>,
    pub financial_points: BTreeMap<String, BTreeMap<FinancialCycle, Vec<TurningPoint>>>,
}

fn date_series(series: &QuarterlySeries, cfg: &RunConfig) -> SeriesDating {
    let min_len = 2 * cfg.rules.window + 1;
    if series.len() < min_len {
        return SeriesDating {
            country: series.country.clone(),
            variable: series.variable.clone(),
            n_candidates: 0,
            points: vec![],
            phases: vec![],
            leading_dropped: series.len() as i64,
            trailing_dropped: 0,
            skipped: Some(format!(
                "series too short: {} observations, need {min_len}",
                series.len()
            )),
        };
    }
    let candidates = find_candidate_extrema(series, &cfg.rules).expect("length checked");
    let points = censor_turning_points(&candidates, &cfg.rules);
    let phases = extract_phases(&points);
    let (leading, trailing) = match (points.first(), points.last()) {
        (Some(first), Some(last)) => (
            first.time.quarters_since(series.start),
            series.end().quarters_since(last.time),
        ),
        _ => (series.len() as i64, 0),
    };
    SeriesDating {
        country: series.country.clone(),
        variable: series.variable.clone(),
        n_candidates: candidates.len(),
        points,
        phases,
        leading_dropped: leading,
        trailing_dropped: trailing,
        skipped: None,
    }
}

pub fn date_all(cfg: &RunConfig, panel: &Panel) -> Result<DatedCycles> {
    let fin_variables = [
        (FinancialCycle::Credit, cfg.credit_variable.clone()),
        (FinancialCycle::House, cfg.house_variable.clone()),
        (FinancialCycle::Equity, cfg.equity_variable.clone()),
    ];
    let mut per_series = Vec::new();
    let mut debt_phases = Vec::new();
    let mut financial_points: BTreeMap<String, BTreeMap<FinancialCycle, Vec<TurningPoint>>> =
        BTreeMap::new();

    for country in panel.countries() {
        if let Some(series) = panel.get(&country, &cfg.debt_variable) {
            let dated = date_series(series, cfg);
            for phase in &dated.phases {
                let metrics = phase_metrics(series, phase)?;
                debt_phases.push(CountryPhase {
                    country: country.clone(),
                    phase: *phase,
                    amplitude: metrics.amplitude,
                });
            }
            per_series.push(dated);
        }
        for (cycle, variable) in &fin_variables {
            if let Some(series) = panel.get(&country, variable) {
                let dated = date_series(series, cfg);
                financial_points
                    .entry(country.clone())
                    .or_default()
                    .insert(*cycle, dated.points.clone());
                per_series.push(dated);
            }
        }
    }
    Ok(DatedCycles {
        per_series,
        debt_phases,
        financial_points,
    })
}

/// Spell datasets for one phase kind.
pub struct KindSpells {
    /// All completed phases, no covariates: feeds the summary statistics.
    pub stats: Vec<SpellRecord>,
    /// Growth covariates attached; spells with unavailable windows dropped.
    pub regression: Vec<SpellRecord>,
    pub regression_drops: DropReport,
    /// Growth plus macro covariates, for the robustness stage.
    pub robustness: Vec<SpellRecord>,
    pub robustness_drops: DropReport,
}

pub struct SpellSets {
    pub by_kind: BTreeMap<&'static str, KindSpells>,
}

impl SpellSets {
    pub fn kind(&self, kind: PhaseKind) -> &KindSpells {
        &self.by_kind[kind.label()]
    }
}

pub fn build_spells(cfg: &RunConfig, panel: &Panel, dated: &DatedCycles) -> Result<SpellSets> {
    let win = AssociationWindow::new(cfg.assoc_window)?;
    let growth = PanelWindows::new(panel, cfg.growth_windows.clone());
    let mut all_windows: Vec<WindowSpec> = cfg.growth_windows.clone();
    all_windows.extend(cfg.macro_windows.iter().cloned());
    let with_macro = PanelWindows::new(panel, all_windows);

    let mut by_kind = BTreeMap::new();
    for kind in KINDS {
        let build = |provider: &dyn CovariateProvider| {
            build_spell_dataset(
                &dated.debt_phases,
                &dated.financial_points,
                &panel.groups,
                kind,
                cfg.horizon,
                win,
                provider,
                &cfg.interactions,
            )
        };
        let (stats, _) = build(&NoCovariates)?;
        let (regression, regression_drops) = build(&growth)?;
        let (robustness, robustness_drops) = build(&with_macro)?;
        by_kind.insert(
            kind.label(),
            KindSpells {
                stats,
                regression,
                regression_drops,
                robustness,
                robustness_drops,
            },
        );
    }
    Ok(SpellSets { by_kind })
}

/// Groups to fit: each label plus the pooled sample, or the configured one.
pub fn fit_groups(cfg: &RunConfig, panel: &Panel) -> Result<Vec<String>> {
    let mut labels: Vec<String> = panel.groups.values().cloned().collect();
    labels.sort();
    labels.dedup();
    match &cfg.group_filter {
        None => {
            let mut out = labels;
            out.push("all".to_string());
            Ok(out)
        }
        Some(g) if g == "all" => Ok(vec!["all".to_string()]),
        Some(g) => {
            if !labels.contains(g) {
                bail!("group `{g}` not present in the group map");
            }
            Ok(vec![g.clone()])
        }
    }
}

fn subset<'a>(spells: &'a [SpellRecord], group: &str) -> Vec<&'a SpellRecord> {
    spells
        .iter()
        .filter(|s| group == "all" || s.group == group)
        .collect()
}

/// Ladder definitions from Table level: benchmark, each dummy alone, all
/// dummies, then growth-rate additions. M8 carries every configured growth
/// covariate; interaction columns ride along with models containing their
/// base dummy.
pub fn ladder_specs(cfg: &RunConfig, kind: PhaseKind) -> Vec<ModelSpec> {
    let credit = FinancialCycle::Credit.dummy_name(kind);
    let house = FinancialCycle::House.dummy_name(kind);
    let equity = FinancialCycle::Equity.dummy_name(kind);
    let all = vec![credit.clone(), house.clone(), equity.clone()];
    let with = |base: &[String], extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let every_growth: Vec<&str> = cfg.growth_windows.iter().map(|w| w.name.as_str()).collect();
    let mut specs = vec![
        ModelSpec::new("M1", vec![]),
        ModelSpec::new("M2", vec![credit.clone()]),
        ModelSpec::new("M3", vec![house.clone()]),
        ModelSpec::new("M4", vec![equity.clone()]),
        ModelSpec::new("M5", all.clone()),
        ModelSpec::new("M6", with(&all, &["credit_growth"])),
        ModelSpec::new("M7", with(&all, &["house_growth"])),
        ModelSpec::new("M8", with(&all, &every_growth)),
    ];
    specs.retain(|s| cfg.ladder.contains(&s.label));
    for spec in &mut specs {
        for inter in &cfg.interactions {
            let dummy = inter.cycle.dummy_name(kind);
            if spec.covariates.contains(&dummy) {
                spec.covariates.push(format!("{}_x_{}", dummy, inter.group));
            }
        }
    }
    specs
}

/// Columns available in a spell dataset, dummies first.
fn pool_names(kind: PhaseKind, spells: &[SpellRecord]) -> Vec<String> {
    let mut names: Vec<String> = FinancialCycle::ALL
        .iter()
        .map(|c| c.dummy_name(kind))
        .collect();
    if let Some(first) = spells.first() {
        names.extend(first.covariates.iter().map(|(n, _)| n.clone()));
    }
    names
}

/// Spells to a survival dataset: dummies become 0/1 columns, countries are
/// the frailty groups.
pub fn survival_data(kind: PhaseKind, spells: &[&SpellRecord]) -> Result<SurvivalData> {
    if spells.is_empty() {
        bail!("no spells for {}", kind.label());
    }
    let names = pool_names(kind, &[spells[0].clone()]);
    let rows: Vec<SurvivalSpell> = spells
        .iter()
        .map(|s| {
            let mut covariates = vec![
                s.flags.credit as u8 as f64,
                s.flags.house as u8 as f64,
                s.flags.equity as u8 as f64,
            ];
            covariates.extend(s.covariates.iter().map(|(_, v)| *v));
            SurvivalSpell {
                group: s.country.clone(),
                duration: s.duration as f64,
                covariates,
            }
        })
        .collect();
    Ok(SurvivalData::new(names, rows)?)
}

/// Response, design, column names and group ids for one FE regression.
type FeDesign = (DVector<f64>, DMatrix<f64>, Vec<String>, Vec<String>);

/// The matching fixed-effects design for amplitude regressions.
fn fe_design(kind: PhaseKind, spells: &[&SpellRecord], spec: &ModelSpec) -> Result<FeDesign> {
    let pool = pool_names(kind, &[spells[0].clone()]);
    let y = DVector::from_iterator(spells.len(), spells.iter().map(|s| s.amplitude));
    let mut x = DMatrix::zeros(spells.len(), spec.covariates.len());
    for (j, name) in spec.covariates.iter().enumerate() {
        let idx = pool
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| anyhow!("unknown covariate `{name}`"))?;
        for (i, s) in spells.iter().enumerate() {
            x[(i, j)] = match idx {
                0 => s.flags.credit as u8 as f64,
                1 => s.flags.house as u8 as f64,
                2 => s.flags.equity as u8 as f64,
                _ => s.covariates[idx - 3].1,
            };
        }
    }
    let groups: Vec<String> = spells.iter().map(|s| s.country.clone()).collect();
    Ok((y, x, spec.covariates.clone(), groups))
}

pub struct OutputWriter {
    pub dir: std::path::PathBuf,
    pub format: TableFormat,
}

impl OutputWriter {
    pub fn new(dir: &Path, format: TableFormat) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
        })
    }

    pub fn sub(&self, name: &str) -> Result<OutputWriter> {
        OutputWriter::new(&self.dir.join(name), self.format)
    }

    pub fn write_raw(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_raw(name, &text)
    }

    /// Table in the configured format, plus the full-precision JSON dump.
    pub fn write_table<T: Serialize>(
        &self,
        name: &str,
        md: &str,
        csv: &str,
        value: &T,
    ) -> Result<()> {
        match self.format {
            TableFormat::Csv => self.write_raw(&format!("{name}.csv"), csv)?,
            TableFormat::Md => self.write_raw(&format!("{name}.md"), md)?,
            TableFormat::Json => {}
        }
        self.write_json(&format!("{name}.json"), value)
    }
}

pub fn stage_date_cycles(dated: &DatedCycles, out: &OutputWriter) -> Result<()> {
    let out = out.sub("cycles")?;
    let mut by_country: BTreeMap<&str, Vec<&SeriesDating>> = BTreeMap::new();
    for s in &dated.per_series {
        by_country.entry(&s.country).or_default().push(s);
    }
    for (country, series_list) in &by_country {
        let mut points = String::from("country,variable,kind,time,value\n");
        let mut phases = String::from(
            "country,variable,kind,start,end,duration,start_value,end_value,amplitude,slope\n",
        );
        for s in series_list {
            for p in &s.points {
                let kind = match p.kind {
                    debtcycle::dating::PointKind::Peak => "peak",
                    debtcycle::dating::PointKind::Trough => "trough",
                };
                points.push_str(&format!(
                    "{},{},{},{},{:.6}\n",
                    s.country, s.variable, kind, p.time, p.value
                ));
            }
            for ph in &s.phases {
                let amplitude = 100.0 * (ph.end.value - ph.start.value) / ph.start.value;
                phases.push_str(&format!(
                    "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                    s.country,
                    s.variable,
                    ph.kind.label(),
                    ph.start.time,
                    ph.end.time,
                    ph.duration,
                    ph.start.value,
                    ph.end.value,
                    amplitude,
                    amplitude / ph.duration as f64,
                ));
            }
        }
        out.write_raw(&format!("{country}_turning_points.csv"), &points)?;
        out.write_raw(&format!("{country}_phases.csv"), &phases)?;
    }
    let mut summary = String::from("country,variable,n_candidates,n_points,n_phases,skipped\n");
    let mut segments = String::from("country,variable,position,quarters\n");
    for s in &dated.per_series {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.country,
            s.variable,
            s.n_candidates,
            s.points.len(),
            s.phases.len(),
            s.skipped.clone().unwrap_or_default()
        ));
        if s.leading_dropped > 0 {
            segments.push_str(&format!(
                "{},{},leading,{}\n",
                s.country, s.variable, s.leading_dropped
            ));
        }
        if s.trailing_dropped > 0 {
            segments.push_str(&format!(
                "{},{},trailing,{}\n",
                s.country, s.variable, s.trailing_dropped
            ));
        }
    }
    out.write_raw("summary.csv", &summary)?;
    out.write_raw("segments_dropped.csv", &segments)?;
    Ok(())
}

pub fn stage_stats(spells: &SpellSets, out: &OutputWriter) -> Result<()> {
    let out = out.sub("stats")?;
    let mut all: Vec<SpellRecord> = Vec::new();
    for kind in KINDS {
        all.extend(spells.kind(kind).stats.iter().cloned());
    }
    let rows = summarize(&all);
    out.write_table(
        "group_summary",
        &render_group_summary_md("Features of the dated cycles", &rows),
        &render_group_summary_csv(&rows),
        &rows,
    )?;

    for kind in KINDS {
        let members = &spells.kind(kind).stats;
        let mut groups: Vec<String> = members.iter().map(|s| s.group.clone()).collect();
        groups.sort();
        groups.dedup();
        groups.push("all".to_string());
        let mut csv = String::from("group,kind,category,n,mean_duration\n");
        for g in &groups {
            let sub: Vec<SpellRecord> = members
                .iter()
                .filter(|s| g == "all" || &s.group == g)
                .cloned()
                .collect();
            for row in conditional_duration_means(&sub) {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    g,
                    kind.label(),
                    row.category,
                    row.n,
                    row.mean_duration
                        .map(|v| format!("{v:.10}"))
                        .unwrap_or_default()
                ));
            }
        }
        out.write_raw(&format!("conditional_durations_{}.csv", kind.label()), &csv)?;
    }
    Ok(())
}

pub fn stage_associate(spells: &SpellSets, out: &OutputWriter) -> Result<()> {
    let out = out.sub("spells")?;
    for kind in KINDS {
        let ks = spells.kind(kind);
        let mut buf = Vec::new();
        write_spells_csv(&ks.regression, &mut buf)?;
        out.write_raw(
            &format!("spells_{}.csv", kind.label()),
            &String::from_utf8(buf).expect("utf8 csv"),
        )?;
    }
    let mut drops = String::from("dataset,kind,country,start,reason\n");
    for kind in KINDS {
        let ks = spells.kind(kind);
        for (dataset, report) in [
            ("regression", &ks.regression_drops),
            ("robustness", &ks.robustness_drops),
        ] {
            for d in &report.dropped {
                drops.push_str(&format!(
                    "{dataset},{},{},{},\"{}\"\n",
                    kind.label(),
                    d.country,
                    d.start,
                    d.reason.replace('"', "'")
                ));
            }
        }
    }
    out.write_raw("drop_report.csv", &drops)?;
    Ok(())
}

fn fit_ladder(
    cfg: &RunConfig,
    kind: PhaseKind,
    spells: &[&SpellRecord],
) -> Result<Vec<SurvivalFitSummary>> {
    let data = survival_data(kind, spells)?;
    let specs = ladder_specs(cfg, kind);
    let mut fits: Vec<FrailtyFit> = Vec::new();
    for spec in &specs {
        fits.push(fit_frailty_model(&data, spec)?);
    }
    let baseline = fits.iter().find(|f| f.label == "M1").cloned();
    fits.iter()
        .map(|f| Ok(SurvivalFitSummary::new(f, baseline.as_ref())?))
        .collect()
}

pub fn stage_survival(
    cfg: &RunConfig,
    panel: &Panel,
    spells: &SpellSets,
    out: &OutputWriter,
) -> Result<()> {
    let out = out.sub("survival")?;
    for kind in KINDS {
        for group in fit_groups(cfg, panel)? {
            let members = subset(&spells.kind(kind).regression, &group);
            if members.is_empty() {
                continue;
            }
            let summaries = fit_ladder(cfg, kind, &members)
                .with_context(|| format!("{} / {group}", kind.label()))?;
            let title = format!(
                "Duration of {}s, {}-term, {group}",
                kind.label(),
                cfg.horizon.label()
            );
            out.write_table(
                &format!("survival_{}_{}", kind.label(), group),
                &render_survival_table_md(&title, &summaries),
                &render_survival_fits_csv(&summaries),
                &summaries,
            )?;
        }
    }
    Ok(())
}

pub fn stage_amplitude(
    cfg: &RunConfig,
    panel: &Panel,
    spells: &SpellSets,
    out: &OutputWriter,
) -> Result<()> {
    let out = out.sub("amplitude")?;
    for kind in KINDS {
        for group in fit_groups(cfg, panel)? {
            let members = subset(&spells.kind(kind).regression, &group);
            if members.is_empty() {
                continue;
            }
            let mut summaries = Vec::new();
            for spec in ladder_specs(cfg, kind) {
                let (y, x, names, groups) = fe_design(kind, &members, &spec)?;
                let fit = fit_fixed_effects(&y, &x, &names, &groups)
                    .with_context(|| format!("{} / {group} / {}", kind.label(), spec.label))?;
                summaries.push(FeFitSummary::new(&spec.label, &fit));
            }
            let title = format!(
                "Amplitude of {}s, {}-term, {group}",
                kind.label(),
                cfg.horizon.label()
            );
            out.write_table(
                &format!("amplitude_{}_{}", kind.label(), group),
                &render_fe_table_md(&title, &summaries),
                &render_fe_fits_csv(&summaries),
                &summaries,
            )?;
        }
    }
    Ok(())
}

/// Spell records with principal-component scores appended.
fn with_pca_columns(
    spells: &[&SpellRecord],
    macro_names: &[String],
    n_components: usize,
) -> Result<(Vec<SpellRecord>, PcaSummary)> {
    let rows: Vec<Vec<(String, f64)>> = spells.iter().map(|s| s.covariates.clone()).collect();
    let matrix = covariate_matrix(&rows, macro_names)?;
    let result = pca(&matrix, macro_names)?;
    let enriched = spells
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = (*s).clone();
            for c in 0..n_components {
                s.covariates
                    .push((format!("pc{}", c + 1), result.scores[(i, c)]));
            }
            s
        })
        .collect();
    Ok((enriched, PcaSummary::new(&result, n_components)))
}

/// Spell records with each dummy replaced by its residual on the growth
/// rates (the orthogonalized robustness design).
fn with_orthogonalized_dummies(
    kind: PhaseKind,
    spells: &[&SpellRecord],
) -> Result<Vec<SpellRecord>> {
    let n = spells.len();
    let growth_names = ["credit_growth".to_string(), "house_growth".to_string()];
    let rows: Vec<Vec<(String, f64)>> = spells.iter().map(|s| s.covariates.clone()).collect();
    let growth = covariate_matrix(&rows, &growth_names)?;
    let mut enriched: Vec<SpellRecord> = spells.iter().map(|s| (*s).clone()).collect();
    for cycle in FinancialCycle::ALL {
        let dummy = DVector::from_iterator(n, spells.iter().map(|s| s.flag(cycle) as u8 as f64));
        let resid = orthogonalize(&dummy, &growth)?;
        let name = format!("{}_orth", cycle.dummy_name(kind));
        for (i, s) in enriched.iter_mut().enumerate() {
            s.covariates.push((name.clone(), resid[i]));
        }
    }
    Ok(enriched)
}

fn orth_ladder(kind: PhaseKind) -> Vec<ModelSpec> {
    let names: Vec<String> = FinancialCycle::ALL
        .iter()
        .map(|c| format!("{}_orth", c.dummy_name(kind)))
        .collect();
    vec![
        ModelSpec::new("O1", vec![]),
        ModelSpec::new("O2", vec![names[0].clone()]),
        ModelSpec::new("O3", vec![names[1].clone()]),
        ModelSpec::new("O4", vec![names[2].clone()]),
        ModelSpec::new("O5", names),
    ]
}

pub fn stage_robustness(
    cfg: &RunConfig,
    panel: &Panel,
    spells: &SpellSets,
    out: &OutputWriter,
) -> Result<()> {
    let out = out.sub("robustness")?;
    let macro_names: Vec<String> = cfg.macro_windows.iter().map(|w| w.name.clone()).collect();
    for kind in KINDS {
        for group in fit_groups(cfg, panel)? {
            // PCA controls on the macro-enriched dataset.
            let members = subset(&spells.kind(kind).robustness, &group);
            if members.len() < 8 {
                continue;
            }
            let (enriched, pca_summary) = with_pca_columns(&members, &macro_names, 3)?;
            let refs: Vec<&SpellRecord> = enriched.iter().collect();
            let data = survival_data(kind, &refs)?;
            let mut spec = ladder_specs(cfg, kind)
                .into_iter()
                .last()
                .ok_or_else(|| anyhow!("empty ladder"))?;
            spec.label = "PCA".to_string();
            spec.covariates.extend((1..=3).map(|c| format!("pc{c}")));
            let base_spec = ModelSpec::new("M1", vec![]);
            let baseline = fit_frailty_model(&data, &base_spec)
                .with_context(|| format!("pca baseline {} / {group}", kind.label()))?;
            let fit = fit_frailty_model(&data, &spec)
                .with_context(|| format!("pca {} / {group}", kind.label()))?;
            let summaries = vec![
                SurvivalFitSummary::new(&baseline, None)?,
                SurvivalFitSummary::new(&fit, Some(&baseline))?,
            ];
            let title = format!(
                "Duration robustness with macro principal components, {} / {group}",
                kind.label()
            );
            out.write_table(
                &format!("robustness_pca_{}_{}", kind.label(), group),
                &format!(
                    "{}\n{}",
                    render_pca_summary_md(&pca_summary),
                    render_survival_table_md(&title, &summaries)
                ),
                &render_survival_fits_csv(&summaries),
                &summaries,
            )?;
            out.write_json(
                &format!("pca_summary_{}_{}.json", kind.label(), group),
                &pca_summary,
            )?;

            // Orthogonalized dummies on the growth-covariate dataset.
            let members = subset(&spells.kind(kind).regression, &group);
            if members.is_empty() {
                continue;
            }
            let orth = with_orthogonalized_dummies(kind, &members)?;
            let refs: Vec<&SpellRecord> = orth.iter().collect();
            let data = survival_data(kind, &refs)?;
            let mut summaries = Vec::new();
            let mut baseline: Option<FrailtyFit> = None;
            for spec in orth_ladder(kind) {
                let fit = fit_frailty_model(&data, &spec)
                    .with_context(|| format!("orth {} / {group} / {}", kind.label(), spec.label))?;
                if spec.label == "O1" {
                    baseline = Some(fit.clone());
                }
                summaries.push(SurvivalFitSummary::new(&fit, baseline.as_ref())?);
            }
            let title = format!(
                "Duration robustness with orthogonalized dummies, {} / {group}",
                kind.label()
            );
            out.write_table(
                &format!("robustness_orth_{}_{}", kind.label(), group),
                &render_survival_table_md(&title, &summaries),
                &render_survival_fits_csv(&summaries),
                &summaries,
            )?;

            // Matching amplitude robustness: orthogonalized FE regression.
            let (y, x, names, groups) = fe_design(
                kind,
                &refs,
                &orth_ladder(kind).into_iter().last().expect("O5 exists"),
            )?;
            let fit = fit_fixed_effects(&y, &x, &names, &groups)
                .with_context(|| format!("orth amplitude {} / {group}", kind.label()))?;
            let fe_summaries = vec![FeFitSummary::new("O5", &fit)];
            let title = format!(
                "Amplitude robustness with orthogonalized dummies, {} / {group}",
                kind.label()
            );
            out.write_table(
                &format!("robustness_orth_amplitude_{}_{}", kind.label(), group),
                &render_fe_table_md(&title, &fe_summaries),
                &render_fe_fits_csv(&fe_summaries),
                &fe_summaries,
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub rng_algorithm: &'static str,
    pub config: &'a RunConfig,
    pub notes: Vec<String>,
}

pub fn write_manifest(cfg: &RunConfig, notes: Vec<String>, out: &OutputWriter) -> Result<()> {
    out.write_json(
        "manifest.json",
        &Manifest {
            version: env!("CARGO_PKG_VERSION"),
            rng_algorithm: debtcycle::simulate::RNG_ALGORITHM,
            config: cfg,
            notes,
        },
    )
}

/// Does the panel carry every configured macro variable for at least one
/// country? Robustness is skipped (with a manifest note) otherwise.
pub fn macro_variables_present(cfg: &RunConfig, panel: &Panel) -> bool {
    let vars = panel.variables();
    cfg.macro_windows.iter().all(|w| vars.contains(&w.variable))
}

pub fn run_all(cfg: &RunConfig) -> Result<()> {
    let created = !cfg.out.exists();
    let result = run_all_inner(cfg);
    if result.is_err() && created {
        // A failed bundle leaves no partial outputs behind.
        let _ = std::fs::remove_dir_all(&cfg.out);
    }
    result
}

fn run_all_inner(cfg: &RunConfig) -> Result<()> {
    let out = OutputWriter::new(&cfg.out, cfg.format)?;
    let panel = load(cfg).context("stage load failed")?;
    let dated = date_all(cfg, &panel).context("stage date-cycles failed")?;
    stage_date_cycles(&dated, &out).context("stage date-cycles failed")?;
    let spells = build_spells(cfg, &panel, &dated).context("stage associate failed")?;
    stage_associate(&spells, &out).context("stage associate failed")?;
    stage_stats(&spells, &out).context("stage stats failed")?;
    stage_survival(cfg, &panel, &spells, &out).context("stage survival failed")?;
    stage_amplitude(cfg, &panel, &spells, &out).context("stage amplitude failed")?;
    let mut notes = Vec::new();
    if macro_variables_present(cfg, &panel) {
        stage_robustness(cfg, &panel, &spells, &out).context("stage robustness failed")?;
    } else {
        notes.push("robustness skipped: configured macro variables missing from panel".into());
    }
    write_manifest(cfg, notes, &out).context("stage manifest failed")?;
    Ok(())
}
