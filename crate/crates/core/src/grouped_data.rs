//! Grouped expenditure tables in the per-1000 survey format.
//!
//! A table is a sequence of contiguous expenditure classes `[lower, upper)`
//! with an optional class mean and two frequency columns (households and
//! persons per 1000). The top class is open (`upper = inf`).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal total of a frequency column.
pub const NOMINAL_TOTAL: f64 = 1000.0;

/// Minimum number of classes a sample must carry.
pub const MIN_CLASSES: usize = 3;

const CSV_HEADER: [&str; 5] = ["lower", "upper", "class_mean", "freq_households", "freq_persons"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Rural,
    Urban,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Household,
    Person,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Household => "household",
            Unit::Person => "person",
        })
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "household" | "households" => Ok(Unit::Household),
            "person" | "persons" => Ok(Unit::Person),
            other => Err(Error::InvalidArgument(format!("unknown unit {other:?}"))),
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::Rural => "rural",
            Sector::Urban => "urban",
        })
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rural" => Ok(Sector::Rural),
            "urban" => Ok(Sector::Urban),
            other => Err(Error::InvalidArgument(format!("unknown sector {other:?}"))),
        }
    }
}

/// One row of a grouped table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpenditureClass {
    pub lower: f64,
    /// `f64::INFINITY` for the open top class.
    pub upper: f64,
    pub class_mean: Option<f64>,
    pub freq_households: f64,
    pub freq_persons: f64,
}

impl ExpenditureClass {
    pub fn new(lower: f64, upper: f64, class_mean: Option<f64>, freq_households: f64, freq_persons: f64) -> Self {
        Self {
            lower,
            upper,
            class_mean,
            freq_households,
            freq_persons,
        }
    }

    pub fn frequency(&self, unit: Unit) -> f64 {
        match unit {
            Unit::Household => self.freq_households,
            Unit::Person => self.freq_persons,
        }
    }

    pub fn is_open(&self) -> bool {
        self.upper.is_infinite()
    }
}

/// A validated grouped table.
///
/// Frequencies are per-1000 counts as published. Published columns are
/// rounded row by row, so their sum may miss 1000 by up to half a unit per
/// class; every downstream statistic uses the column's actual total as the
/// effective sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSample {
    classes: Vec<ExpenditureClass>,
    unit: Unit,
    sector: Option<Sector>,
    round_label: String,
    survey_midpoint: Option<f64>,
}

impl GroupedSample {
    /// Validates `classes` for the given unit's frequency column.
    pub fn new(classes: Vec<ExpenditureClass>, unit: Unit) -> Result<Self> {
        validate_classes(&classes, unit)?;
        Ok(Self {
            classes,
            unit,
            sector: None,
            round_label: String::new(),
            survey_midpoint: None,
        })
    }

    pub fn with_sector(mut self, sector: Sector) -> Self {
        self.sector = Some(sector);
        self
    }

    pub fn with_round_label(mut self, label: impl Into<String>) -> Self {
        self.round_label = label.into();
        self
    }

    pub fn with_survey_midpoint(mut self, year: f64) -> Self {
        self.survey_midpoint = Some(year);
        self
    }

    pub fn classes(&self) -> &[ExpenditureClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// The unit whose frequency column was validated at construction.
    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn sector(&self) -> Option<Sector> {
        self.sector
    }

    pub fn round_label(&self) -> &str {
        &self.round_label
    }

    pub fn survey_midpoint(&self) -> Option<f64> {
        self.survey_midpoint
    }

    pub fn frequencies(&self, unit: Unit) -> Vec<f64> {
        self.classes.iter().map(|c| c.frequency(unit)).collect()
    }

    /// Column total, the effective sample size for `unit`.
    pub fn total(&self, unit: Unit) -> f64 {
        self.classes.iter().map(|c| c.frequency(unit)).sum()
    }

    /// Class shares `f_i / total`.
    pub fn proportions(&self, unit: Unit) -> Vec<f64> {
        let total = self.total(unit);
        self.classes.iter().map(|c| c.frequency(unit) / total).collect()
    }

    /// Interior class limits `z_1 .. z_{k-1}`.
    pub fn interior_limits(&self) -> Vec<f64> {
        self.classes[..self.classes.len() - 1].iter().map(|c| c.upper).collect()
    }

    pub fn has_class_means(&self) -> bool {
        self.classes.iter().all(|c| c.class_mean.is_some())
    }

    pub fn class_means(&self) -> Result<Vec<f64>> {
        self.classes
            .iter()
            .map(|c| c.class_mean.ok_or(Error::MissingClassMeans))
            .collect()
    }

    /// Re-validates against another unit's frequency column.
    pub fn with_unit(&self, unit: Unit) -> Result<Self> {
        validate_classes(&self.classes, unit)?;
        let mut out = self.clone();
        out.unit = unit;
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for c in &self.classes {
            w.write_record([
                c.lower.to_string(),
                format_limit(c.upper),
                c.class_mean.map(|m| m.to_string()).unwrap_or_default(),
                c.freq_households.to_string(),
                c.freq_persons.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_limit(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        x.to_string()
    }
}

/// Rounding slack on a per-1000 column: each of `k` entries may be off by half a unit.
pub fn frequency_slack(n_classes: usize) -> f64 {
    0.5 * n_classes as f64
}

fn validate_classes(classes: &[ExpenditureClass], unit: Unit) -> Result<()> {
    if classes.len() < MIN_CLASSES {
        return Err(Error::TooFewClasses {
            found: classes.len(),
            required: MIN_CLASSES,
        });
    }
    let last = classes.len() - 1;
    for (i, c) in classes.iter().enumerate() {
        let bad = |reason: &str| Error::InvalidClass {
            index: i,
            reason: reason.to_string(),
        };
        if !c.lower.is_finite() || c.lower < 0.0 {
            return Err(bad("lower limit must be finite and nonnegative"));
        }
        if c.upper.is_nan() || c.upper <= c.lower {
            return Err(bad("upper limit must exceed lower limit"));
        }
        if c.upper.is_infinite() && i != last {
            return Err(bad("only the last class may be open"));
        }
        for (name, f) in [("household", c.freq_households), ("person", c.freq_persons)] {
            if !f.is_finite() || f < 0.0 {
                return Err(bad(&format!("{name} frequency must be finite and >= 0")));
            }
        }
        if let Some(m) = c.class_mean {
            if !m.is_finite() || m < c.lower || m > c.upper {
                return Err(Error::MeanOutsideClass {
                    index: i,
                    mean: m,
                    lower: c.lower,
                    upper: c.upper,
                });
            }
        }
        if i < last && classes[i + 1].lower != c.upper {
            return Err(Error::NonContiguousClasses {
                index: i,
                upper: c.upper,
                lower: classes[i + 1].lower,
            });
        }
    }
    let sum: f64 = classes.iter().map(|c| c.frequency(unit)).sum();
    let slack = frequency_slack(classes.len());
    if (sum - NOMINAL_TOTAL).abs() > slack {
        return Err(Error::FrequencySumMismatch { unit, sum, slack });
    }
    Ok(())
}

fn parse_cell(raw: &str, line: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("+inf") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("{column}: {s:?} is not a number"),
        })
}

/// Reads a grouped table from CSV (`lower,upper,class_mean,freq_households,freq_persons`).
pub fn read_grouped_csv<R: Read>(reader: R, unit: Unit) -> Result<GroupedSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!(
                "expected header {:?}, found {:?}",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut classes = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        let lower = parse_cell(&record[0], line, "lower")?;
        let upper = parse_cell(&record[1], line, "upper")?;
        let class_mean = match record[2].trim() {
            "" => None,
            s => Some(parse_cell(s, line, "class_mean")?),
        };
        let freq_households = parse_cell(&record[3], line, "freq_households")?;
        let freq_persons = parse_cell(&record[4], line, "freq_persons")?;
        classes.push(ExpenditureClass::new(
            lower,
            upper,
            class_mean,
            freq_households,
            freq_persons,
        ));
    }
    GroupedSample::new(classes, unit)
}

/// Loads a grouped table; the round label defaults to the file stem.
pub fn load_grouped_csv(path: impl AsRef<Path>, unit: Unit) -> Result<GroupedSample> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let sample = read_grouped_csv(file, unit)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(sample.with_round_label(label))
}

/// Price indices keyed by round label (base period = 1).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeflatorSeries {
    entries: BTreeMap<String, f64>,
}

impl DeflatorSeries {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        if let Some((k, v)) = entries.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidDeflator(format!(
                "index for {k:?} must be positive, got {v}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, round_label: &str) -> Option<f64> {
        self.entries.get(round_label).copied()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != 2 {
                return Err(Error::MalformedRow {
                    line,
                    reason: "expected round_label,index".into(),
                });
            }
            entries.push((record[0].to_string(), parse_cell(&record[1], line, "index")?));
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Expresses a sample in constant rupees by dividing limits and means by the round's index.
pub fn deflate(sample: &GroupedSample, series: &DeflatorSeries) -> Result<GroupedSample> {
    let index = series
        .get(&sample.round_label)
        .ok_or_else(|| Error::MissingDeflator(sample.round_label.clone()))?;
    let mut out = sample.clone();
    for c in &mut out.classes {
        c.lower /= index;
        c.upper /= index;
        c.class_mean = c.class_mean.map(|m| m / index);
    }
    Ok(out)
}

/// Census anchors of rural and urban counts used to weight sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorWeights {
    anchors: Vec<(f64, f64, f64)>,
}

impl SectorWeights {
    pub fn new(anchors: Vec<(f64, f64, f64)>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::InvalidWeights("at least two anchors are required".into()));
        }
        for w in anchors.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidWeights("anchor years must be strictly increasing".into()));
            }
        }
        if anchors
            .iter()
            .any(|&(y, r, u)| !y.is_finite() || !(r > 0.0 && r.is_finite()) || !(u > 0.0 && u.is_finite()))
        {
            return Err(Error::InvalidWeights("counts must be positive".into()));
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64, f64)] {
        &self.anchors
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut anchors = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != 3 {
                return Err(Error::MalformedRow {
                    line,
                    reason: "expected year,rural_count,urban_count".into(),
                });
            }
            anchors.push((
                parse_cell(&record[0], line, "year")?,
                parse_cell(&record[1], line, "rural_count")?,
                parse_cell(&record[2], line, "urban_count")?,
            ));
        }
        Self::new(anchors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Rural and urban population shares at `year`, interpolating the census
/// counts piecewise-linearly and extrapolating from the outermost segment.
pub fn sector_weight(weights: &SectorWeights, year: f64) -> Result<(f64, f64)> {
    let a = &weights.anchors;
    let seg = a.windows(2).position(|w| year <= w[1].0).unwrap_or(a.len() - 2);
    let (y0, r0, u0) = a[seg];
    let (y1, r1, u1) = a[seg + 1];
    let t = (year - y0) / (y1 - y0);
    let rural = r0 + t * (r1 - r0);
    let urban = u0 + t * (u1 - u0);
    if !(rural > 0.0 && urban > 0.0) {
        return Err(Error::InvalidWeights(format!(
            "extrapolated counts at {year} are not positive"
        )));
    }
    let total = rural + urban;
    Ok((rural / total, urban / total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> GroupedSample {
        GroupedSample::new(
            vec![
                ExpenditureClass::new(0.0, 235.0, Some(197.45), 500.0, 400.0),
                ExpenditureClass::new(235.0, 270.0, Some(254.81), 300.0, 350.0),
                ExpenditureClass::new(270.0, f64::INFINITY, Some(400.0), 200.0, 250.0),
            ],
            Unit::Person,
        )
        .unwrap()
        .with_round_label("2006-07")
    }

    #[test]
    fn single_class_is_rejected() {
        let err = GroupedSample::new(
            vec![ExpenditureClass::new(0.0, f64::INFINITY, Some(100.0), 1000.0, 1000.0)],
            Unit::Household,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooFewClasses { found: 1, .. }));
    }

    #[test]
    fn rejects_gap_between_classes() {
        let mut classes = table().classes().to_vec();
        classes[1].lower = 240.0;
        let err = GroupedSample::new(classes, Unit::Person).unwrap_err();
        assert!(matches!(err, Error::NonContiguousClasses { index: 0, .. }));
    }

    #[test]
    fn rejects_mean_outside_class() {
        let mut classes = table().classes().to_vec();
        classes[1].class_mean = Some(280.0);
        let err = GroupedSample::new(classes, Unit::Person).unwrap_err();
        assert!(matches!(err, Error::MeanOutsideClass { index: 1, .. }));
    }

    #[test]
    fn rejects_open_class_before_the_end() {
        let mut classes = table().classes().to_vec();
        classes[1].upper = f64::INFINITY;
        let err = GroupedSample::new(classes, Unit::Person).unwrap_err();
        assert!(matches!(err, Error::InvalidClass { index: 1, .. }));
    }

    #[test]
    fn frequency_sum_outside_rounding_slack() {
        let mut classes = table().classes().to_vec();
        // three classes allow a slack of 1.5
        classes[0].freq_persons = 398.0;
        let err = GroupedSample::new(classes.clone(), Unit::Person).unwrap_err();
        assert!(matches!(err, Error::FrequencySumMismatch { .. }));
        classes[0].freq_persons = 399.0;
        let ok = GroupedSample::new(classes, Unit::Person).unwrap();
        assert_eq!(ok.total(Unit::Person), 999.0);
    }

    #[test]
    fn missing_mean_is_allowed_but_reported() {
        let mut classes = table().classes().to_vec();
        classes[2].class_mean = None;
        let s = GroupedSample::new(classes, Unit::Person).unwrap();
        assert!(!s.has_class_means());
        assert!(matches!(s.class_means(), Err(Error::MissingClassMeans)));
    }

    #[test]
    fn deflate_scales_limits_and_means() {
        let s = table();
        let two = DeflatorSeries::new([("2006-07".to_string(), 2.0)]).unwrap();
        let d = deflate(&s, &two).unwrap();
        let c = &d.classes()[1];
        assert_eq!((c.lower, c.upper), (117.5, 135.0));
        assert!((c.class_mean.unwrap() - 127.405).abs() < 1e-12);
        assert!(d.classes()[2].upper.is_infinite());
        assert_eq!(d.frequencies(Unit::Person), s.frequencies(Unit::Person));

        let one = DeflatorSeries::new([("2006-07".to_string(), 1.0)]).unwrap();
        assert_eq!(deflate(&s, &one).unwrap(), s);

        let other = DeflatorSeries::new([("1983".to_string(), 1.0)]).unwrap();
        assert!(matches!(deflate(&s, &other), Err(Error::MissingDeflator(l)) if l == "2006-07"));
    }

    #[test]
    fn deflator_rejects_nonpositive_index() {
        assert!(DeflatorSeries::new([("x".to_string(), 0.0)]).is_err());
        let csv = "round_label,index\n1983,0.25\n2006-07,1\n";
        let d = DeflatorSeries::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(d.get("1983"), Some(0.25));
    }

    #[test]
    fn sector_weight_interpolates_and_extrapolates() {
        let w = SectorWeights::new(vec![(1991.0, 100.0, 100.0), (2001.0, 100.0, 300.0)]).unwrap();
        let (r, u) = sector_weight(&w, 1991.0).unwrap();
        assert_eq!((r, u), (0.5, 0.5));
        let (r, _) = sector_weight(&w, 1996.0).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        let (r, u) = sector_weight(&w, 2006.0).unwrap();
        assert!((r - 0.2).abs() < 1e-15);
        assert!((u - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sector_weights_validation() {
        assert!(SectorWeights::new(vec![(1991.0, 1.0, 1.0)]).is_err());
        assert!(SectorWeights::new(vec![(2001.0, 1.0, 1.0), (1991.0, 1.0, 1.0)]).is_err());
        assert!(SectorWeights::new(vec![(1991.0, 0.0, 1.0), (2001.0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn reject_non_numeric_cell() {
        let csv = "lower,upper,class_mean,freq_households,freq_persons\n0,10,abc,500,500\n";
        let err = read_grouped_csv(csv.as_bytes(), Unit::Person).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn reject_wrong_header() {
        let csv = "lo,hi,mean,h,p\n0,10,5,500,500\n";
        let err = read_grouped_csv(csv.as_bytes(), Unit::Person).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 1, .. }));
    }
}
