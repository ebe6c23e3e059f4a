#![allow(dead_code)]

use std::path::PathBuf;

use expendist::{load_grouped_csv, DistributionSpec, GroupedSample, SeriesTable, Unit};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn rural(unit: Unit) -> GroupedSample {
    load_grouped_csv(data_dir().join("rural_2006-07.csv"), unit).unwrap()
}

pub fn urban(unit: Unit) -> GroupedSample {
    load_grouped_csv(data_dir().join("urban_2006-07.csv"), unit).unwrap()
}

pub fn estimates(sector: &str, unit: &str) -> SeriesTable {
    SeriesTable::load(data_dir().join(format!("mixture_estimates_{sector}_{unit}.csv"))).unwrap()
}

/// Published mixture parameters for one round.
pub fn published(sector: &str, unit: &str, round: &str) -> DistributionSpec {
    let t = estimates(sector, unit);
    let i = t.labels.iter().position(|l| l == round).unwrap();
    let c = |n: &str| t.column(n).unwrap()[i];
    DistributionSpec::mixture(c("x_M"), c("sigma2"), c("nu"), c("x0"), c("pi"))
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}
