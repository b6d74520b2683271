//! Turning-point dating of quarterly series and phase extraction.
//!
//! Candidate extrema are local maxima/minima against every lag and lead up to
//! `window` quarters (strict inequalities). Three censoring rules are then
//! enforced, iterated to a fixed point:
//!
//! * R1 — peaks and troughs alternate; among consecutive same-kind points only
//!   the highest peak / lowest trough survives.
//! * R2 — each peak must exceed the previous trough and each trough must lie
//!   below the previous peak; a violating adjacent pair loses its less
//!   prominent member.
//! * R3 — phases shorter than `min_phase` quarters lose the endpoint whose
//!   removal reduces total excursion the least; cycles (same-kind spans)
//!   shorter than `min_cycle` quarters lose the intervening opposite point.
//!
//! Tie conventions are frozen so that independent re-implementations can
//! reproduce the output exactly: violations are repaired leftmost-first, one
//! deletion at a time, rescanning from R1 after every deletion; equal-value
//! R1 runs keep the earliest point; prominence and excursion ties delete the
//! later member.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{QuarterIndex, QuarterlySeries};

/// How a candidate is compared against its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowComparison {
    /// Strictly above/below every neighbour at lags 1..=window.
    #[default]
    AllLags,
    /// Strictly above/below the neighbours at lag == window only.
    ExactLag,
}

/// Censoring parameters; defaults are the short-term rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoringRules {
    /// Comparison window k in quarters.
    pub window: usize,
    /// Minimum phase length in quarters.
    pub min_phase: i64,
    /// Minimum complete-cycle length in quarters.
    pub min_cycle: i64,
    pub comparison: WindowComparison,
}

impl CensoringRules {
    pub fn new(window: usize, min_phase: i64, min_cycle: i64) -> Result<Self> {
        let rules = Self {
            window,
            min_phase,
            min_cycle,
            comparison: WindowComparison::AllLags,
        };
        rules.validate()?;
        Ok(rules)
    }

    /// Short-term rules: phases >= 2 quarters, cycles >= 5.
    pub fn short_term() -> Self {
        Self::new(2, 2, 5).expect("valid built-in rules")
    }

    /// Medium-term rules: phases >= 4 quarters, cycles >= 9.
    pub fn medium_term() -> Self {
        Self::new(2, 4, 9).expect("valid built-in rules")
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidRules("window must be >= 1".into()));
        }
        if self.min_phase < 1 {
            return Err(Error::InvalidRules("min_phase must be >= 1".into()));
        }
        if self.min_cycle < 2 * self.min_phase + 1 {
            return Err(Error::InvalidRules(format!(
                "min_cycle {} must be >= 2*min_phase + 1 = {}",
                self.min_cycle,
                2 * self.min_phase + 1
            )));
        }
        Ok(())
    }
}

/// The two analysis horizons; each binds censoring rules and an association
/// window (1 quarter short-term, 2 medium-term).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Short,
    Medium,
}

impl Horizon {
    pub fn rules(&self) -> CensoringRules {
        match self {
            Horizon::Short => CensoringRules::short_term(),
            Horizon::Medium => CensoringRules::medium_term(),
        }
    }

    pub fn association_window(&self) -> i64 {
        match self {
            Horizon::Short => 1,
            Horizon::Medium => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Horizon::Short => "short",
            Horizon::Medium => "medium",
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "short" => Ok(Horizon::Short),
            "medium" => Ok(Horizon::Medium),
            other => Err(Error::InvalidRules(format!("unknown horizon `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    Peak,
    Trough,
}

impl PointKind {
    pub fn opposite(&self) -> PointKind {
        match self {
            PointKind::Peak => PointKind::Trough,
            PointKind::Trough => PointKind::Peak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub kind: PointKind,
    pub time: QuarterIndex,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Expansion,
    Contraction,
}

impl PhaseKind {
    pub fn label(&self) -> &'static str {
        match self {
            PhaseKind::Expansion => "expansion",
            PhaseKind::Contraction => "contraction",
        }
    }
}

/// A completed phase between two consecutive turning points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: TurningPoint,
    pub end: TurningPoint,
    pub duration: i64,
}

/// Scan for local extrema: offsets t with `window <= t <= n-1-window` whose
/// value is strictly above (peak) or below (trough) each compared neighbour.
/// Flat comparisons disqualify, so plateaus yield no candidate.
pub fn find_candidate_extrema(
    series: &QuarterlySeries,
    rules: &CensoringRules,
) -> Result<Vec<TurningPoint>> {
    rules.validate()?;
    let n = series.len();
    let w = rules.window;
    if n < 2 * w + 1 {
        return Err(Error::SeriesTooShort {
            len: n,
            needed: 2 * w + 1,
        });
    }
    let lags: Vec<usize> = match rules.comparison {
        WindowComparison::AllLags => (1..=w).collect(),
        WindowComparison::ExactLag => vec![w],
    };
    let v = &series.values;
    let mut out = Vec::new();
    for t in w..n - w {
        let is_peak = lags.iter().all(|&k| v[t] > v[t - k] && v[t] > v[t + k]);
        let is_trough = lags.iter().all(|&k| v[t] < v[t - k] && v[t] < v[t + k]);
        if is_peak || is_trough {
            out.push(TurningPoint {
                kind: if is_peak {
                    PointKind::Peak
                } else {
                    PointKind::Trough
                },
                time: series.quarter_at(t),
                value: v[t],
            });
        }
    }
    Ok(out)
}

/// Total excursion of a turning-point list: sum of |value steps| between
/// adjacent points. R3 deletes the member whose removal preserves most of it.
#[cfg(test)]
fn excursion(points: &[TurningPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].value - w[0].value).abs())
        .sum()
}

fn excursion_without(points: &[TurningPoint], skip: usize) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<&TurningPoint> = None;
    for (i, p) in points.iter().enumerate() {
        if i == skip {
            continue;
        }
        if let Some(q) = prev {
            total += (p.value - q.value).abs();
        }
        prev = Some(p);
    }
    total
}

/// Prominence of a pair member against its outer neighbour (the adjacent
/// point away from the pair); members without an outer neighbour rank lowest.
fn prominence(points: &[TurningPoint], idx: usize, pair_left: usize) -> f64 {
    let outer = if idx == pair_left {
        idx.checked_sub(1)
    } else if idx + 1 < points.len() {
        Some(idx + 1)
    } else {
        None
    };
    match outer {
        Some(o) => (points[idx].value - points[o].value).abs(),
        None => -1.0,
    }
}

/// One repair step: find the leftmost violation in rule priority order
/// R1 → R2 → R3(min_phase) → min_cycle and return the index to delete.
fn first_deletion(points: &[TurningPoint], rules: &CensoringRules) -> Option<usize> {
    // R1: adjacent same-kind pair keeps the more extreme member (ties keep
    // the earlier one).
    for i in 0..points.len().saturating_sub(1) {
        let (a, b) = (&points[i], &points[i + 1]);
        if a.kind == b.kind {
            let keep_first = match a.kind {
                PointKind::Peak => a.value >= b.value,
                PointKind::Trough => a.value <= b.value,
            };
            return Some(if keep_first { i + 1 } else { i });
        }
    }
    // R2: mis-ordered adjacent pair loses its less prominent member (ties
    // delete the later one).
    for i in 0..points.len().saturating_sub(1) {
        let (a, b) = (&points[i], &points[i + 1]);
        let violated = match b.kind {
            PointKind::Peak => b.value <= a.value,
            PointKind::Trough => b.value >= a.value,
        };
        if violated {
            let pa = prominence(points, i, i);
            let pb = prominence(points, i + 1, i);
            return Some(if pb <= pa { i + 1 } else { i });
        }
    }
    // R3: short phase loses the member whose removal least reduces total
    // excursion (ties delete the later one).
    for i in 0..points.len().saturating_sub(1) {
        let span = points[i + 1].time.quarters_since(points[i].time);
        if span < rules.min_phase {
            let keep_a = excursion_without(points, i + 1);
            let keep_b = excursion_without(points, i);
            return Some(if keep_a >= keep_b { i + 1 } else { i });
        }
    }
    // Minimum cycle: a same-kind span shorter than min_cycle drops the
    // intervening opposite-kind point.
    for i in 0..points.len().saturating_sub(2) {
        let span = points[i + 2].time.quarters_since(points[i].time);
        if points[i].kind == points[i + 2].kind && span < rules.min_cycle {
            return Some(i + 1);
        }
    }
    None
}

/// Apply the censoring rules to candidate extrema, iterating single
/// deletions to a fixed point.
pub fn censor_turning_points(
    candidates: &[TurningPoint],
    rules: &CensoringRules,
) -> Vec<TurningPoint> {
    let mut points = candidates.to_vec();
    while let Some(idx) = first_deletion(&points, rules) {
        points.remove(idx);
    }
    points
}

/// Pair adjacent turning points into phases; incomplete leading and trailing
/// segments are discarded.
pub fn extract_phases(points: &[TurningPoint]) -> Vec<Phase> {
    points
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let kind = match start.kind {
                PointKind::Trough => PhaseKind::Expansion,
                PointKind::Peak => PhaseKind::Contraction,
            };
            Phase {
                kind,
                start,
                end,
                duration: end.time.quarters_since(start.time),
            }
        })
        .collect()
}

/// Full dating pipeline for one series.
pub fn date_cycles(series: &QuarterlySeries, rules: &CensoringRules) -> Result<Vec<Phase>> {
    let candidates = find_candidate_extrema(series, rules)?;
    let points = censor_turning_points(&candidates, rules);
    Ok(extract_phases(&points))
}
