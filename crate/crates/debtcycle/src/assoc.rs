//! Boom/bust association dummies and spell-level regression datasets.
//!
//! An expansion is associated with a financial bust when a financial-cycle
//! peak falls within `w` quarters of the debt trough that starts the
//! expansion; a contraction is associated with a boom when a financial
//! trough falls within `w` quarters of the starting debt peak. Multiple
//! qualifying points still yield a single 0/1 dummy.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dating::{Horizon, Phase, PhaseKind, PointKind, TurningPoint};
use crate::error::{Error, Result};
use crate::panel::QuarterIndex;

/// Symmetric association window in quarters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationWindow(pub i64);

impl AssociationWindow {
    pub fn new(w: i64) -> Result<Self> {
        if w < 1 {
            return Err(Error::InvalidRules(
                "association window must be >= 1".into(),
            ));
        }
        Ok(Self(w))
    }
}

/// Bust flags for expansions, boom flags for contractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssociationFlags {
    pub credit: bool,
    pub house: bool,
    pub equity: bool,
}

/// The financial-cycle variables whose turning points drive the dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FinancialCycle {
    Credit,
    House,
    Equity,
}

impl FinancialCycle {
    pub const ALL: [FinancialCycle; 3] = [
        FinancialCycle::Credit,
        FinancialCycle::House,
        FinancialCycle::Equity,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FinancialCycle::Credit => "credit",
            FinancialCycle::House => "house",
            FinancialCycle::Equity => "equity",
        }
    }

    /// Dummy column name: busts pair with expansions, booms with contractions.
    pub fn dummy_name(&self, kind: PhaseKind) -> String {
        let suffix = match kind {
            PhaseKind::Expansion => "bust",
            PhaseKind::Contraction => "boom",
        };
        format!("{}_{}", self.label(), suffix)
    }
}

/// One public-debt phase flattened to a regression row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpellRecord {
    pub country: String,
    pub group: String,
    pub kind: PhaseKind,
    pub horizon: Horizon,
    pub start: QuarterIndex,
    pub end: QuarterIndex,
    pub duration: i64,
    pub amplitude: f64,
    pub flags: AssociationFlags,
    /// Named covariates in a stable order, shared across all spells of a
    /// dataset.
    pub covariates: Vec<(String, f64)>,
}

impl SpellRecord {
    pub fn flag(&self, cycle: FinancialCycle) -> bool {
        match cycle {
            FinancialCycle::Credit => self.flags.credit,
            FinancialCycle::House => self.flags.house,
            FinancialCycle::Equity => self.flags.equity,
        }
    }

    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// 1 iff any financial turning point of the kind required by the phase lies
/// within `win` quarters of the phase's starting turning point.
pub fn associate_phase(
    debt_phase: &Phase,
    fin_points: &[TurningPoint],
    win: AssociationWindow,
) -> bool {
    let event_time = debt_phase.start.time;
    let required = match debt_phase.kind {
        PhaseKind::Expansion => PointKind::Peak,
        PhaseKind::Contraction => PointKind::Trough,
    };
    fin_points
        .iter()
        .any(|p| p.kind == required && p.time.quarters_since(event_time).abs() <= win.0)
}

/// Supplies covariate rows for a spell keyed by its country and the quarter
/// of its starting turning point. Unavailable windows drop the spell.
pub trait CovariateProvider {
    fn covariates(&self, country: &str, event: QuarterIndex) -> Result<Vec<(String, f64)>>;
}

/// Provider with no covariates; every spell survives.
pub struct NoCovariates;

impl CovariateProvider for NoCovariates {
    fn covariates(&self, _country: &str, _event: QuarterIndex) -> Result<Vec<(String, f64)>> {
        Ok(Vec::new())
    }
}

/// A debt phase tagged with its country, ready for dataset assembly.
#[derive(Debug, Clone)]
pub struct CountryPhase {
    pub country: String,
    pub phase: Phase,
    pub amplitude: f64,
}

/// Interaction column: flag dummy times membership of a group label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub cycle: FinancialCycle,
    pub group: String,
}

/// Why a spell was excluded from the dataset.
#[derive(Debug, Clone, Serialize)]
pub struct DroppedSpell {
    pub country: String,
    pub kind: PhaseKind,
    pub start: QuarterIndex,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DropReport {
    pub dropped: Vec<DroppedSpell>,
}

impl DropReport {
    pub fn count(&self) -> usize {
        self.dropped.len()
    }
}

/// Assemble one `SpellRecord` per completed debt phase of `kind`, with the
/// three association dummies, covariates, and any requested interactions.
///
/// `financial_points` maps country → financial cycle → censored turning
/// points of that series, dated under the same horizon's rules.
#[allow(clippy::too_many_arguments)]
pub fn build_spell_dataset(
    debt_phases: &[CountryPhase],
    financial_points: &BTreeMap<String, BTreeMap<FinancialCycle, Vec<TurningPoint>>>,
    groups: &BTreeMap<String, String>,
    kind: PhaseKind,
    horizon: Horizon,
    win: AssociationWindow,
    covariates: &dyn CovariateProvider,
    interactions: &[InteractionSpec],
) -> Result<(Vec<SpellRecord>, DropReport)> {
    let mut records = Vec::new();
    let mut report = DropReport::default();
    for cp in debt_phases.iter().filter(|cp| cp.phase.kind == kind) {
        let group = groups
            .get(&cp.country)
            .ok_or_else(|| Error::MissingGroup(cp.country.clone()))?
            .clone();
        let empty = BTreeMap::new();
        let fins = financial_points.get(&cp.country).unwrap_or(&empty);
        let flag_for = |cycle: FinancialCycle| {
            fins.get(&cycle)
                .map(|pts| associate_phase(&cp.phase, pts, win))
                .unwrap_or(false)
        };
        let flags = AssociationFlags {
            credit: flag_for(FinancialCycle::Credit),
            house: flag_for(FinancialCycle::House),
            equity: flag_for(FinancialCycle::Equity),
        };
        let mut cov = match covariates.covariates(&cp.country, cp.phase.start.time) {
            Ok(cov) => cov,
            Err(e) => {
                report.dropped.push(DroppedSpell {
                    country: cp.country.clone(),
                    kind,
                    start: cp.phase.start.time,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        for spec in interactions {
            let flag_set = match spec.cycle {
                FinancialCycle::Credit => flags.credit,
                FinancialCycle::House => flags.house,
                FinancialCycle::Equity => flags.equity,
            };
            let value = if flag_set && group == spec.group {
                1.0
            } else {
                0.0
            };
            cov.push((
                format!("{}_x_{}", spec.cycle.dummy_name(kind), spec.group),
                value,
            ));
        }
        records.push(SpellRecord {
            country: cp.country.clone(),
            group,
            kind,
            horizon,
            start: cp.phase.start.time,
            end: cp.phase.end.time,
            duration: cp.phase.duration,
            amplitude: cp.amplitude,
            flags,
            covariates: cov,
        });
    }
    Ok((records, report))
}

/// Write a spell dataset as CSV with a stable column order.
pub fn write_spells_csv(spells: &[SpellRecord], mut out: impl Write) -> Result<()> {
    let cov_names: Vec<String> = spells
        .first()
        .map(|s| s.covariates.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut header = vec![
        "country".to_string(),
        "group".to_string(),
        "kind".to_string(),
        "horizon".to_string(),
        "start".to_string(),
        "end".to_string(),
        "duration".to_string(),
        "amplitude".to_string(),
        "credit_flag".to_string(),
        "house_flag".to_string(),
        "equity_flag".to_string(),
    ];
    header.extend(cov_names.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    for s in spells {
        let mut fields = vec![
            s.country.clone(),
            s.group.clone(),
            s.kind.label().to_string(),
            s.horizon.label().to_string(),
            s.start.to_string(),
            s.end.to_string(),
            s.duration.to_string(),
            format!("{:.6}", s.amplitude),
            (s.flags.credit as u8).to_string(),
            (s.flags.house as u8).to_string(),
            (s.flags.equity as u8).to_string(),
        ];
        for name in &cov_names {
            let v = s
                .covariate(name)
                .ok_or_else(|| Error::UnknownCovariate(name.clone()))?;
            fields.push(format!("{v:.6}"));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
