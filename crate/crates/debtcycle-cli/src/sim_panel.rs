//! Synthetic quarterly panels for closed-loop testing: debt and financial
//! series built from turning schedules, plus macro control series.

use anyhow::Result;
use rand::Rng;

use debtcycle::dating::CensoringRules;
use debtcycle::panel::{parse_quarter, QuarterIndex};
use debtcycle::simulate::{group_rng, simulate_turning_series, TurningSchedule};

pub struct SimPanelConfig {
    pub seed: u64,
    pub countries: usize,
    /// Approximate series length in quarters.
    pub length: usize,
}

impl Default for SimPanelConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            countries: 8,
            length: 112,
        }
    }
}

pub struct SimPanel {
    /// (country, quarter, variable, value) rows, ready for CSV.
    pub rows: Vec<(String, QuarterIndex, String, f64)>,
    pub groups: Vec<(String, String)>,
}

fn cycle_schedule(
    rng: &mut impl Rng,
    start: QuarterIndex,
    base: f64,
    swing_lo: f64,
    swing_hi: f64,
    length: usize,
) -> TurningSchedule {
    let mut knots = vec![(start, base)];
    let mut value = base;
    let mut time = start;
    let mut rising = rng.gen::<bool>();
    let mut covered = 0usize;
    while covered < length {
        let spacing = rng.gen_range(3..=9i64);
        let swing = rng.gen_range(swing_lo..swing_hi);
        value = if rising {
            value + swing
        } else {
            (value - swing).max(base * 0.15)
        };
        time = time.offset(spacing);
        knots.push((time, value));
        rising = !rising;
        covered += spacing as usize;
    }
    TurningSchedule {
        knots,
        noise_sd: 0.3,
    }
}

/// A positive random-walk series for macro variables.
fn walk_series(rng: &mut impl Rng, start_value: f64, drift: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut v = start_value;
    for _ in 0..len {
        out.push(v);
        let step: f64 = rng.gen_range(-1.2..1.2) + drift;
        v = (v * (1.0 + step / 100.0)).max(start_value * 0.2);
    }
    out
}

/// A mean-reverting series for the account balance (levels, in percent).
fn balance_series(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut v: f64 = rng.gen_range(-2.0..2.0);
    for _ in 0..len {
        out.push(v);
        v = 0.8 * v + rng.gen_range(-0.8..0.8);
    }
    out
}

/// Generate a deterministic synthetic panel. Schedules satisfy the
/// short-term censoring rules, so the short-horizon pipeline recovers the
/// planted cycles; one country's credit series starts late to exercise the
/// covariate drop path.
pub fn simulate_panel(cfg: &SimPanelConfig) -> Result<SimPanel> {
    let rules = CensoringRules::short_term();
    let base_start = parse_quarter("1994Q1").expect("valid literal");
    let mut rows = Vec::new();
    let mut groups = Vec::new();

    // One global oil-price series shared by every country.
    let mut oil_rng = group_rng(cfg.seed, 1_000_000);
    let oil = walk_series(&mut oil_rng, 40.0, 0.4, cfg.length + 8);

    for c in 0..cfg.countries {
        let country = format!("C{c:02}");
        let group = if c < cfg.countries.div_ceil(2) {
            "AE"
        } else {
            "EM"
        };
        groups.push((country.clone(), group.to_string()));
        let mut rng = group_rng(cfg.seed, c as u64);
        let start = base_start.offset(2 * c as i64);

        let cyclical: [(&str, f64, f64, f64); 4] = [
            ("debt", 60.0, 6.0, 22.0),
            ("credit", 90.0, 8.0, 28.0),
            ("house", 100.0, 6.0, 20.0),
            ("equity", 100.0, 10.0, 35.0),
        ];
        for (variable, base, lo, hi) in cyclical {
            // A late-starting credit series exercises spell drops.
            let series_start = if variable == "credit" && c == 1 {
                start.offset(40)
            } else {
                start
            };
            let length =
                cfg.length - (series_start.quarters_since(start) as usize).min(cfg.length / 2);
            let schedule = cycle_schedule(&mut rng, series_start, base, lo, hi, length);
            let stream = rng.gen::<u64>();
            let (series, _) = simulate_turning_series(&schedule, &rules, stream)?;
            for (i, &v) in series.values.iter().enumerate() {
                rows.push((
                    country.clone(),
                    series.quarter_at(i),
                    variable.to_string(),
                    v,
                ));
            }
        }

        let macros: [(&str, f64, f64); 4] = [
            ("gdp", 100.0, 0.6),
            ("money", 100.0, 1.0),
            ("cpi", 100.0, 0.5),
            ("reer", 100.0, 0.0),
        ];
        for (variable, base, drift) in macros {
            for (i, v) in walk_series(&mut rng, base, drift, cfg.length + 8)
                .into_iter()
                .enumerate()
            {
                rows.push((
                    country.clone(),
                    start.offset(i as i64 - 4),
                    variable.to_string(),
                    v,
                ));
            }
        }
        for (i, v) in balance_series(&mut rng, cfg.length + 8)
            .into_iter()
            .enumerate()
        {
            rows.push((
                country.clone(),
                start.offset(i as i64 - 4),
                "balance".to_string(),
                v,
            ));
        }
        for (i, &v) in oil.iter().enumerate() {
            rows.push((
                country.clone(),
                start.offset(i as i64 - 4),
                "oil".to_string(),
                v,
            ));
        }
    }

    Ok(SimPanel { rows, groups })
}

pub fn panel_csv(panel: &SimPanel) -> String {
    let mut out = String::from("country,quarter,variable,value\n");
    for (country, quarter, variable, value) in &panel.rows {
        out.push_str(&format!("{country},{quarter},{variable},{value:.6}\n"));
    }
    out
}

pub fn groups_csv(panel: &SimPanel) -> String {
    let mut out = String::from("country,group\n");
    for (country, group) in &panel.groups {
        out.push_str(&format!("{country},{group}\n"));
    }
    out
}
