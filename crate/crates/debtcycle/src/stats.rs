//! Per-phase metrics and grouped summary statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assoc::SpellRecord;
use crate::dating::{Horizon, Phase, PhaseKind};
use crate::error::{Error, Result};
use crate::panel::QuarterlySeries;

/// Duration in quarters, amplitude in percent of the starting value, and
/// slope = amplitude / duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub duration: i64,
    pub amplitude: f64,
    pub slope: f64,
}

/// Amplitude is the percentage change of the series across the phase,
/// measured between the phase's own turning-point values.
pub fn phase_metrics(series: &QuarterlySeries, phase: &Phase) -> Result<PhaseMetrics> {
    if series.offset_of(phase.start.time).is_none() || series.offset_of(phase.end.time).is_none() {
        return Err(Error::PhaseOutOfRange);
    }
    if phase.start.value == 0.0 {
        return Err(Error::ZeroStartValue);
    }
    let amplitude = 100.0 * (phase.end.value - phase.start.value) / phase.start.value;
    Ok(PhaseMetrics {
        duration: phase.duration,
        amplitude,
        slope: amplitude / phase.duration as f64,
    })
}

/// Mean plus dispersion; `sd`/`se` are absent below two observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

fn moments(xs: &[f64]) -> Option<Moments> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some(Moments {
            mean,
            sd: None,
            se: None,
        });
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    Some(Moments {
        mean,
        sd: Some(sd),
        se: Some(sd / (n as f64).sqrt()),
    })
}

/// One row of the phase-feature table: a (group, kind, horizon) cell with
/// event count, moments of duration/amplitude/slope, and association counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub kind: PhaseKind,
    pub horizon: Horizon,
    pub n_events: usize,
    pub duration: Option<Moments>,
    pub amplitude: Option<Moments>,
    pub slope: Option<Moments>,
    pub n_credit_assoc: usize,
    pub n_house_assoc: usize,
    pub n_equity_assoc: usize,
}

/// Summarise spells per (group, kind, horizon), appending a `Total` row per
/// (kind, horizon) when more than one group is present. The slope moments
/// are moments of per-spell slopes, not mean amplitude over mean duration.
pub fn summarize(spells: &[SpellRecord]) -> Vec<GroupSummary> {
    let mut buckets: BTreeMap<(String, &'static str, &'static str), Vec<&SpellRecord>> =
        BTreeMap::new();
    for s in spells {
        buckets
            .entry((s.group.clone(), s.kind.label(), s.horizon.label()))
            .or_default()
            .push(s);
        buckets
            .entry(("Total".to_string(), s.kind.label(), s.horizon.label()))
            .or_default()
            .push(s);
    }
    let n_groups = buckets
        .keys()
        .filter(|(g, _, _)| g != "Total")
        .map(|(g, _, _)| g)
        .collect::<std::collections::BTreeSet<_>>()
        .len();

    let mut out = Vec::new();
    for ((group, _, _), members) in &buckets {
        if group == "Total" && n_groups < 2 {
            continue;
        }
        let first = members[0];
        let durations: Vec<f64> = members.iter().map(|s| s.duration as f64).collect();
        let amplitudes: Vec<f64> = members.iter().map(|s| s.amplitude).collect();
        let slopes: Vec<f64> = members
            .iter()
            .map(|s| s.amplitude / s.duration as f64)
            .collect();
        out.push(GroupSummary {
            group: group.clone(),
            kind: first.kind,
            horizon: first.horizon,
            n_events: members.len(),
            duration: moments(&durations),
            amplitude: moments(&amplitudes),
            slope: moments(&slopes),
            n_credit_assoc: members.iter().filter(|s| s.flags.credit).count(),
            n_house_assoc: members.iter().filter(|s| s.flags.house).count(),
            n_equity_assoc: members.iter().filter(|s| s.flags.equity).count(),
        });
    }
    out.sort_by(|a, b| {
        (a.horizon, a.kind.label(), a.group == "Total", &a.group).cmp(&(
            b.horizon,
            b.kind.label(),
            b.group == "Total",
            &b.group,
        ))
    });
    out
}

/// One bar of the conditional-duration chart: spells in an association
/// category and their mean duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDurationRow {
    pub category: String,
    pub n: usize,
    pub mean_duration: Option<f64>,
}

/// Mean duration without any association, and per financial-cycle type with
/// that flag set. Categories overlap: a spell flagged for two bust types
/// counts in both rows.
pub fn conditional_duration_means(spells: &[SpellRecord]) -> Vec<ConditionalDurationRow> {
    let mean = |items: Vec<i64>| {
        if items.is_empty() {
            None
        } else {
            Some(items.iter().sum::<i64>() as f64 / items.len() as f64)
        }
    };
    let none: Vec<i64> = spells
        .iter()
        .filter(|s| !s.flags.credit && !s.flags.house && !s.flags.equity)
        .map(|s| s.duration)
        .collect();
    let mut rows = vec![ConditionalDurationRow {
        category: "none".to_string(),
        n: none.len(),
        mean_duration: mean(none),
    }];
    let flags: [(&str, fn(&SpellRecord) -> bool); 3] = [
        ("credit", |s| s.flags.credit),
        ("house", |s| s.flags.house),
        ("equity", |s| s.flags.equity),
    ];
    for (name, pick) in flags {
        let members: Vec<i64> = spells
            .iter()
            .filter(|s| pick(s))
            .map(|s| s.duration)
            .collect();
        if !members.is_empty() {
            rows.push(ConditionalDurationRow {
                category: name.to_string(),
                n: members.len(),
                mean_duration: mean(members),
            });
        }
    }
    rows
}
