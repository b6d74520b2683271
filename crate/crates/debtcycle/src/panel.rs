//! Quarterly country panels: quarter arithmetic, series storage, CSV ingestion
//! and elementary transforms.
//!
//! Input panels are long-format CSV with header `country,quarter,variable,value`,
//! one observation per row, plus a separate `country,group` mapping file.
//! Quarter literals are `YYYYQn` (e.g. `1988Q2`). Interior gaps in a
//! (country, variable) series are hard errors; leading gaps simply shorten
//! the series.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar quarter, totally ordered; the successor of (Y, 4) is (Y+1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuarterIndex {
    year: i32,
    quarter: u8,
}

impl QuarterIndex {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::QuarterParse(format!("{year}Q{quarter}")));
        }
        Ok(Self { year, quarter })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn quarter(&self) -> u8 {
        self.quarter
    }

    /// Quarters since 1Q of year 0; the total order and all distances live here.
    fn ordinal(&self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(4) as i32,
            quarter: (ord.rem_euclid(4) + 1) as u8,
        }
    }

    /// The quarter `n` quarters after (`n < 0`: before) this one.
    pub fn offset(&self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed distance in quarters from `earlier` to `self`.
    pub fn quarters_since(&self, earlier: QuarterIndex) -> i64 {
        self.ordinal() - earlier.ordinal()
    }
}

impl fmt::Display for QuarterIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for QuarterIndex {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        parse_quarter(text)
    }
}

/// Parse a `YYYYQn` quarter literal.
pub fn parse_quarter(text: &str) -> Result<QuarterIndex> {
    let err = || Error::QuarterParse(text.to_string());
    let (year_part, quarter_part) = text.split_once(['Q', 'q']).ok_or_else(err)?;
    let year: i32 = year_part.trim().parse().map_err(|_| err())?;
    let quarter: u8 = quarter_part.trim().parse().map_err(|_| err())?;
    QuarterIndex::new(year, quarter).map_err(|_| err())
}

/// One country's quarterly values of one variable, gap-free by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterlySeries {
    pub country: String,
    pub variable: String,
    pub start: QuarterIndex,
    pub values: Vec<f64>,
}

impl QuarterlySeries {
    pub fn new(
        country: impl Into<String>,
        variable: impl Into<String>,
        start: QuarterIndex,
        values: Vec<f64>,
    ) -> Self {
        assert!(!values.is_empty(), "series must have length >= 1");
        Self {
            country: country.into(),
            variable: variable.into(),
            start,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> QuarterIndex {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn quarter_at(&self, offset: usize) -> QuarterIndex {
        self.start.offset(offset as i64)
    }

    /// Offset of `q` within the series, if covered.
    pub fn offset_of(&self, q: QuarterIndex) -> Option<usize> {
        let d = q.quarters_since(self.start);
        if d >= 0 && (d as usize) < self.values.len() {
            Some(d as usize)
        } else {
            None
        }
    }

    pub fn value_at(&self, q: QuarterIndex) -> Option<f64> {
        self.offset_of(q).map(|i| self.values[i])
    }

    /// Quarter-on-quarter percentage change; the output starts one quarter later.
    pub fn pct_change(&self) -> Result<QuarterlySeries> {
        if self.values.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: self.values.len(),
                needed: 2,
            });
        }
        let mut out = Vec::with_capacity(self.values.len() - 1);
        for i in 1..self.values.len() {
            let prev = self.values[i - 1];
            if prev == 0.0 {
                return Err(Error::ZeroDenominator {
                    country: self.country.clone(),
                    variable: self.variable.clone(),
                    quarter: self.quarter_at(i - 1),
                });
            }
            out.push(100.0 * (self.values[i] - prev) / prev);
        }
        Ok(QuarterlySeries {
            country: self.country.clone(),
            variable: self.variable.clone(),
            start: self.start.offset(1),
            values: out,
        })
    }
}

/// A collection of series keyed by (country, variable), plus country groups.
///
/// Immutable after construction; `BTreeMap` keys make every iteration order
/// deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    pub series: BTreeMap<(String, String), QuarterlySeries>,
    pub groups: BTreeMap<String, String>,
}

impl Panel {
    pub fn get(&self, country: &str, variable: &str) -> Option<&QuarterlySeries> {
        self.series
            .get(&(country.to_string(), variable.to_string()))
    }

    pub fn countries(&self) -> Vec<String> {
        let mut out: Vec<String> = self.series.keys().map(|(c, _)| c.clone()).collect();
        out.dedup();
        out
    }

    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = self.series.keys().map(|(_, v)| v.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn group_of(&self, country: &str) -> Option<&str> {
        self.groups.get(country).map(|s| s.as_str())
    }
}

#[derive(Debug, Deserialize)]
struct PanelRow {
    country: String,
    quarter: String,
    variable: String,
    value: String,
}

#[derive(Debug, Deserialize)]
struct GroupRow {
    country: String,
    group: String,
}

/// Load a long-format panel plus its country→group mapping.
///
/// Rows may arrive in any order. Empty/`NA` values are treated as missing
/// observations; a missing observation strictly inside a series is a gap
/// error, naming the first absent quarter.
pub fn load_panel(panel_csv: impl Read, groups_csv: impl Read) -> Result<Panel> {
    let mut per_series: BTreeMap<(String, String), BTreeMap<QuarterIndex, f64>> = BTreeMap::new();

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(panel_csv);
    for row in rdr.deserialize() {
        let row: PanelRow = row?;
        let value = row.value.trim();
        if value.is_empty() || value.eq_ignore_ascii_case("na") || value.eq_ignore_ascii_case("nan")
        {
            continue;
        }
        let quarter = parse_quarter(&row.quarter)?;
        let value: f64 = value.parse().map_err(|_| Error::ValueParse {
            country: row.country.clone(),
            variable: row.variable.clone(),
            quarter: row.quarter.clone(),
            value: row.value.clone(),
        })?;
        let key = (row.country, row.variable);
        if per_series
            .entry(key.clone())
            .or_default()
            .insert(quarter, value)
            .is_some()
        {
            return Err(Error::DuplicateObservation {
                country: key.0,
                variable: key.1,
                quarter,
            });
        }
    }

    let mut series = BTreeMap::new();
    for ((country, variable), obs) in per_series {
        let (&start, _) = obs.first_key_value().expect("non-empty by construction");
        let mut values = Vec::with_capacity(obs.len());
        let mut expected = start;
        for (&q, &v) in &obs {
            if q != expected {
                return Err(Error::SeriesGap {
                    country,
                    variable,
                    gap: expected,
                });
            }
            values.push(v);
            expected = expected.offset(1);
        }
        series.insert(
            (country.clone(), variable.clone()),
            QuarterlySeries::new(country, variable, start, values),
        );
    }

    let mut groups = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(groups_csv);
    for row in rdr.deserialize() {
        let row: GroupRow = row?;
        groups.insert(row.country, row.group);
    }
    for (country, _) in series.keys() {
        if !groups.contains_key(country) {
            return Err(Error::MissingGroup(country.clone()));
        }
    }

    Ok(Panel { series, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(year: i32, quarter: u8) -> QuarterIndex {
        QuarterIndex::new(year, quarter).unwrap()
    }

    #[test]
    fn parses_quarter_literals() {
        assert_eq!(parse_quarter("1988Q2").unwrap(), q(1988, 2));
        assert_eq!(parse_quarter("2022Q4").unwrap(), q(2022, 4));
        assert!(parse_quarter("2022Q5").is_err());
        assert!(parse_quarter("2022").is_err());
        assert!(parse_quarter("Q3").is_err());
    }

    #[test]
    fn quarter_arithmetic_wraps_years() {
        assert_eq!(q(1999, 4).offset(1), q(2000, 1));
        assert_eq!(q(2000, 1).offset(-1), q(1999, 4));
        assert_eq!(q(2000, 4).quarters_since(q(1998, 4)), 8);
    }

    #[test]
    fn pct_change_arithmetic() {
        let s = QuarterlySeries::new("AU", "debt", q(2000, 1), vec![100.0, 110.0]);
        assert_eq!(s.pct_change().unwrap().values, vec![10.0]);

        let s = QuarterlySeries::new("AU", "debt", q(2000, 1), vec![50.0, 100.0, 50.0]);
        let d = s.pct_change().unwrap();
        assert_eq!(d.values, vec![100.0, -50.0]);
        assert_eq!(d.start, q(2000, 2));

        let s = QuarterlySeries::new("AU", "debt", q(2000, 1), vec![7.0; 5]);
        assert!(s.pct_change().unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pct_change_rejects_zero_denominator() {
        let s = QuarterlySeries::new("AU", "debt", q(2000, 1), vec![0.0, 1.0]);
        match s.pct_change() {
            Err(Error::ZeroDenominator { quarter, .. }) => assert_eq!(quarter, q(2000, 1)),
            other => panic!("expected ZeroDenominator, got {other:?}"),
        }
    }

    #[test]
    fn loads_long_format_panel() {
        let panel = "country,quarter,variable,value\n\
                     AU,1998Q4,debt,20.0\n\
                     AU,1999Q1,debt,21.0\n\
                     AU,1999Q2,debt,22.0\n";
        let groups = "country,group\nAU,AE\n";
        let p = load_panel(panel.as_bytes(), groups.as_bytes()).unwrap();
        let s = p.get("AU", "debt").unwrap();
        assert_eq!(s.start, q(1998, 4));
        assert_eq!(s.values, vec![20.0, 21.0, 22.0]);
        assert_eq!(p.group_of("AU"), Some("AE"));
    }

    #[test]
    fn interior_gap_is_an_error() {
        let panel = "country,quarter,variable,value\n\
                     AU,1998Q4,debt,20.0\n\
                     AU,1999Q2,debt,22.0\n";
        let groups = "country,group\nAU,AE\n";
        match load_panel(panel.as_bytes(), groups.as_bytes()) {
            Err(Error::SeriesGap { gap, .. }) => assert_eq!(gap, q(1999, 1)),
            other => panic!("expected SeriesGap, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_yields_empty_panel() {
        let p = load_panel(
            "country,quarter,variable,value\n".as_bytes(),
            "country,group\n".as_bytes(),
        )
        .unwrap();
        assert!(p.series.is_empty());
    }

    #[test]
    fn missing_group_is_an_error() {
        let panel = "country,quarter,variable,value\nAU,1998Q4,debt,20.0\n";
        let groups = "country,group\nBR,EM\n";
        assert!(matches!(
            load_panel(panel.as_bytes(), groups.as_bytes()),
            Err(Error::MissingGroup(c)) if c == "AU"
        ));
    }

    #[test]
    fn load_is_order_insensitive() {
        let rows = [
            "AU,1999Q1,debt,21.0",
            "AU,1998Q4,debt,20.0",
            "BR,2001Q3,debt,30.0",
            "AU,1999Q2,credit,80.0",
            "AU,1999Q1,credit,79.0",
        ];
        let groups = "country,group\nAU,AE\nBR,EM\n";
        let mk = |order: &[usize]| {
            let body: Vec<&str> = order.iter().map(|&i| rows[i]).collect();
            let csv = format!("country,quarter,variable,value\n{}\n", body.join("\n"));
            load_panel(csv.as_bytes(), groups.as_bytes()).unwrap()
        };
        assert_eq!(mk(&[0, 1, 2, 3, 4]), mk(&[4, 2, 3, 1, 0]));
    }
}
