//! Linear (and quadratic) time trends of fitted parameters and Gini values,
//! with t-tests of a zero slope.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::estimation::FitResult;

/// How a round label such as `2006-07` becomes a fractional year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeEncoding {
    /// Centre of the calendar years covered: `2006-07` is 2007.0 and
    /// `1983` is 1983.5.
    #[default]
    Midpoint,
    /// Middle of the first year: `2006-07` is 2006.5.
    Start,
}

impl FromStr for TimeEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "midpoint" => Ok(TimeEncoding::Midpoint),
            "start" => Ok(TimeEncoding::Start),
            _ => Err(Error::InvalidArgument(format!("unknown time encoding {s:?}"))),
        }
    }
}

/// Parses `YYYY`, `YYYY-YY` or `YYYY-YYYY` into a fractional year.
pub fn survey_time(label: &str, encoding: TimeEncoding) -> Result<f64> {
    let bad = || Error::InvalidArgument(format!("cannot read a survey period from {label:?}"));
    let label = label.trim();
    let (first, second) = match label.split_once(['-', '\u{2013}']) {
        Some((a, b)) => (a.trim(), Some(b.trim())),
        None => (label, None),
    };
    if first.len() != 4 {
        return Err(bad());
    }
    let y1: i32 = first.parse().map_err(|_| bad())?;
    let y2 = match second {
        None => y1,
        Some(b) if b.len() == 4 => b.parse().map_err(|_| bad())?,
        Some(b) if b.len() == 2 => {
            let tail: i32 = b.parse().map_err(|_| bad())?;
            let mut y = y1 - y1.rem_euclid(100) + tail;
            if y < y1 {
                y += 100;
            }
            y
        }
        Some(_) => return Err(bad()),
    };
    if y2 < y1 {
        return Err(bad());
    }
    Ok(match encoding {
        TimeEncoding::Midpoint => (y1 + y2 + 1) as f64 / 2.0,
        TimeEncoding::Start => y1 as f64 + 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub intercept: f64,
    pub slope: f64,
    pub slope_std_error: f64,
    pub slope_p_value: f64,
    pub r2: f64,
    pub f_stat: f64,
    pub ci95: (f64, f64),
    pub error_variance: f64,
    pub n: usize,
}

/// Ordinary least squares of `values` on `times` with a two-sided t-test of
/// a zero slope on `n - 2` degrees of freedom.
pub fn linear_trend(times: &[f64], values: &[f64]) -> Result<TrendResult> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: values.len(),
        });
    }
    let n = times.len();
    if n < 3 {
        return Err(Error::DegenerateDesign(format!("{n} observations, need at least 3")));
    }
    let nf = n as f64;
    let tbar = times.iter().sum::<f64>() / nf;
    let ybar = values.iter().sum::<f64>() / nf;
    let sxx: f64 = times.iter().map(|t| (t - tbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateDesign("all times are equal".into()));
    }
    let sxy: f64 = times.iter().zip(values).map(|(t, y)| (t - tbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;
    let sse: f64 = times
        .iter()
        .zip(values)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    let sst: f64 = values.iter().map(|y| (y - ybar).powi(2)).sum();
    let df = nf - 2.0;
    let error_variance = sse / df;
    let se = (error_variance / sxx).sqrt();

    let student = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let (t_stat, p) = if se > 0.0 {
        let t = slope / se;
        (t, (2.0 * student.sf(t.abs())).min(1.0))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY.copysign(slope), 0.0)
    };
    let crit = student.inverse_cdf(0.975);
    let r2 = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(TrendResult {
        intercept,
        slope,
        slope_std_error: se,
        slope_p_value: p,
        r2,
        f_stat: t_stat * t_stat,
        ci95: (slope - crit * se, slope + crit * se),
        error_variance,
        n,
    })
}

/// Mixture parameters that can be trended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "x_M")]
    XM,
    #[serde(rename = "sigma2")]
    Sigma2,
    #[serde(rename = "nu")]
    Nu,
    #[serde(rename = "x0")]
    X0,
    #[serde(rename = "pi")]
    Pi,
}

impl Parameter {
    pub const ALL: [Parameter; 5] = [
        Parameter::XM,
        Parameter::Sigma2,
        Parameter::Nu,
        Parameter::X0,
        Parameter::Pi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::XM => "x_M",
            Parameter::Sigma2 => "sigma2",
            Parameter::Nu => "nu",
            Parameter::X0 => "x0",
            Parameter::Pi => "pi",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {s:?}")))
    }
}

/// Trend of one parameter across a series of fits of a single family.
pub fn trend_report(fit_series: &[(f64, FitResult)], parameter: Parameter) -> Result<TrendResult> {
    let specs: Vec<(f64, DistributionSpec)> = fit_series.iter().map(|(t, f)| (*t, f.spec)).collect();
    trend_of_specs(&specs, parameter)
}

/// As [`trend_report`], for bare parameter sets.
pub fn trend_of_specs(series: &[(f64, DistributionSpec)], parameter: Parameter) -> Result<TrendResult> {
    let Some((_, first)) = series.first() else {
        return Err(Error::DegenerateDesign("empty series".into()));
    };
    let family = first.family();
    let mut times = Vec::with_capacity(series.len());
    let mut values = Vec::with_capacity(series.len());
    for (t, spec) in series {
        if spec.family() != family {
            return Err(Error::MixedFamilies(format!("{} and {}", family, spec.family())));
        }
        let v = spec
            .params()
            .into_iter()
            .find(|(name, _)| *name == parameter.name())
            .map(|(_, v)| v)
            .ok_or_else(|| Error::InvalidArgument(format!("family {family} has no parameter {parameter}")))?;
        times.push(*t);
        values.push(v);
    }
    linear_trend(&times, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTrend {
    /// Coefficients of `1, (t - centre), (t - centre)^2`.
    pub coefficients: [f64; 3],
    pub centre: f64,
    pub p_values: [f64; 3],
    pub r2: f64,
}

/// Least squares on a centred quadratic in time.
pub fn quadratic_trend(times: &[f64], values: &[f64]) -> Result<QuadraticTrend> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: values.len(),
        });
    }
    let n = times.len();
    if n < 4 {
        return Err(Error::DegenerateDesign(format!("{n} observations, need at least 4")));
    }
    let centre = times.iter().sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, 3, |r, c| (times[r] - centre).powi(c as i32));
    let y = DVector::from_column_slice(values);
    let xtx = x.transpose() * &x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::DegenerateDesign("fewer than three distinct times".into()))?;
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let df = (n - 3) as f64;
    let s2 = resid.norm_squared() / df;
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let student = StudentsT::new(0.0, 1.0, df.max(1.0)).expect("positive degrees of freedom");
    let mut p_values = [1.0; 3];
    for (j, p) in p_values.iter_mut().enumerate() {
        let se = (s2 * inv[(j, j)]).sqrt();
        *p = if se > 0.0 {
            (2.0 * student.sf((beta[j] / se).abs())).min(1.0)
        } else if beta[j] == 0.0 {
            1.0
        } else {
            0.0
        };
    }
    Ok(QuadraticTrend {
        coefficients: [beta[0], beta[1], beta[2]],
        centre,
        p_values,
        r2: if sst > 0.0 {
            1.0 - resid.norm_squared() / sst
        } else {
            0.0
        },
    })
}

/// A table keyed by round label with named numeric columns, such as a
/// series of published parameter estimates or Gini values.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub labels: Vec<String>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl SeriesTable {
    /// First column must be `round_label`; every other column is numeric.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("round_label") || headers.len() < 2 {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "expected header starting with round_label and at least one value column".into(),
            });
        }
        let mut labels = Vec::new();
        let mut columns: Vec<(String, Vec<f64>)> =
            headers.iter().skip(1).map(|h| (h.to_string(), Vec::new())).collect();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            labels.push(rec.get(0).unwrap_or_default().to_string());
            for (j, (name, col)) in columns.iter_mut().enumerate() {
                let cell = rec.get(j + 1).unwrap_or_default();
                let v = cell.parse::<f64>().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("column {name}: {cell:?} is not a number"),
                })?;
                col.push(v);
            }
        }
        Ok(SeriesTable { labels, columns })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn times(&self, encoding: TimeEncoding) -> Result<Vec<f64>> {
        self.labels.iter().map(|l| survey_time(l, encoding)).collect()
    }

    /// Reads rows as mixture parameter sets (columns `x_M, sigma2, nu, x0, pi`).
    pub fn mixture_series(&self, encoding: TimeEncoding) -> Result<Vec<(f64, DistributionSpec)>> {
        let col = |p: Parameter| {
            self.column(p.name())
                .ok_or_else(|| Error::InvalidArgument(format!("table has no {p} column")))
        };
        let (xm, s2, nu, x0, pi) = (
            col(Parameter::XM)?,
            col(Parameter::Sigma2)?,
            col(Parameter::Nu)?,
            col(Parameter::X0)?,
            col(Parameter::Pi)?,
        );
        let times = self.times(encoding)?;
        (0..self.labels.len())
            .map(|i| {
                let spec = DistributionSpec::mixture(xm[i], s2[i], nu[i], x0[i], pi[i]);
                spec.validate()?;
                Ok((times[i], spec))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_parsing() {
        assert_eq!(survey_time("2006-07", TimeEncoding::Midpoint).unwrap(), 2007.0);
        assert_eq!(survey_time("2006-07", TimeEncoding::Start).unwrap(), 2006.5);
        assert_eq!(survey_time("1983", TimeEncoding::Midpoint).unwrap(), 1983.5);
        assert_eq!(survey_time("1999-00", TimeEncoding::Midpoint).unwrap(), 2000.0);
        assert_eq!(survey_time("1999-2000", TimeEncoding::Midpoint).unwrap(), 2000.0);
        assert!(survey_time("83", TimeEncoding::Midpoint).is_err());
        assert!(survey_time("2006-05", TimeEncoding::Midpoint).is_ok());
        assert!(survey_time("2006-2005", TimeEncoding::Midpoint).is_err());
    }

    #[test]
    fn perfect_line() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let r = linear_trend(&t, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
        assert!(r.slope_p_value < 1e-9);
    }

    #[test]
    fn constant_series() {
        let r = linear_trend(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.slope_p_value, 1.0);
    }

    #[test]
    fn f_is_t_squared_and_ci_contains_slope() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 2.5, 2.2, 3.9, 3.1, 4.4];
        let r = linear_trend(&t, &y).unwrap();
        let tt = r.slope / r.slope_std_error;
        assert!((r.f_stat - tt * tt).abs() < 1e-9);
        assert!(r.ci95.0 < r.slope && r.slope < r.ci95.1);
    }

    #[test]
    fn degenerate_designs() {
        assert!(matches!(
            linear_trend(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(
            linear_trend(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateDesign(_))
        ));
    }

    #[test]
    fn mixed_families_rejected() {
        let a = DistributionSpec::mixture(500.0, 0.2, 2.0, 900.0, 0.2);
        let b = DistributionSpec::Lognormal {
            x_m: 500.0,
            sigma2: 0.2,
        };
        assert!(matches!(
            trend_of_specs(&[(1.0, a), (2.0, b), (3.0, a)], Parameter::XM),
            Err(Error::MixedFamilies(_))
        ));
    }

    #[test]
    fn quadratic_recovers_curvature() {
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 1.0 + 0.5 * x + 0.25 * x * x).collect();
        let q = quadratic_trend(&t, &y).unwrap();
        assert!((q.coefficients[2] - 0.25).abs() < 1e-10);
        assert!((q.r2 - 1.0).abs() < 1e-12);
    }
}
