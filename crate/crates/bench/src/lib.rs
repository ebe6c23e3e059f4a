//! Shared inputs for the benchmarks under `benches/`.

use std::path::PathBuf;

use expendist::{load_grouped_csv, GroupedSample, Unit};

/// One of the shipped 2006-07 tables, `sector` being `rural` or `urban`.
pub fn fixture(sector: &str, unit: Unit) -> GroupedSample {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(format!("{sector}_2006-07.csv"));
    load_grouped_csv(path, unit).expect("shipped fixture loads")
}
