//! Goodness of fit for grouped tables: the Kolmogorov–Smirnov distance at
//! class limits, and Monte-Carlo p-values obtained by re-binning synthetic
//! samples drawn from the fitted model.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimation::{chi2_statistic, expected_counts_for_limits, merge_sparse_classes, MIN_PREDICTED};
use crate::grouped_data::{GroupedSample, Unit, NOMINAL_TOTAL};

pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "chi2")]
    Chi2,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Ks => "KS",
            Statistic::Chi2 => "chi2",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(Statistic::Ks),
            "chi2" | "chisq" => Ok(Statistic::Chi2),
            _ => Err(Error::InvalidArgument(format!("unknown statistic {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic_name: Statistic,
    pub observed_value: f64,
    pub p_value: f64,
    pub replicates: usize,
    pub mc_sample_size: usize,
    pub seed: u64,
}

impl GofReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{} = {:.4}  p = {:.4}  ({} replicates of n = {}, seed {})",
            self.statistic_name, self.observed_value, self.p_value, self.replicates, self.mc_sample_size, self.seed
        )
    }
}

/// Largest gap between the empirical and model CDFs over the interior
/// class limits. The empirical CDF is the cumulative frequency divided by
/// the column total.
pub fn ks_grouped(sample: &GroupedSample, spec: &DistributionSpec, unit: Unit) -> Result<f64> {
    spec.validate()?;
    Ok(ks_from_counts(
        &sample.frequencies(unit),
        &sample.interior_limits(),
        spec,
    ))
}

/// KS distance for arbitrary class counts; `counts` has one more entry than
/// `interior`.
pub fn ks_from_counts(counts: &[f64], interior: &[f64], spec: &DistributionSpec) -> f64 {
    let total: f64 = counts.iter().sum();
    let mut cum = 0.0;
    let mut d: f64 = 0.0;
    for (c, &z) in counts.iter().zip(interior) {
        cum += c;
        d = d.max((cum / total - spec.cdf_raw(z)).abs());
    }
    d
}

fn chi2_from_counts(counts: &[f64], expected: &[f64]) -> f64 {
    let (o, e) = merge_sparse_classes(counts, expected, MIN_PREDICTED);
    chi2_statistic(&o, &e).unwrap_or(f64::INFINITY)
}

/// Monte-Carlo p-value with the nominal 1000 draws per replicate.
pub fn mc_pvalue(
    sample: &GroupedSample,
    spec: &DistributionSpec,
    unit: Unit,
    statistic: Statistic,
    replicates: usize,
    seed: u64,
) -> Result<GofReport> {
    mc_pvalue_sized(sample, spec, unit, statistic, replicates, NOMINAL_TOTAL as usize, seed)
}

/// Monte-Carlo p-value: each replicate draws `mc_sample_size` values from
/// `spec`, bins them into the sample's classes (draws above the last limit
/// land in the open top class) and recomputes the statistic. The p-value is
/// the share of replicates strictly above the observed statistic.
///
/// Replicate `r` uses stream `r` of a generator keyed by `seed`, so the
/// result does not depend on thread scheduling.
pub fn mc_pvalue_sized(
    sample: &GroupedSample,
    spec: &DistributionSpec,
    unit: Unit,
    statistic: Statistic,
    replicates: usize,
    mc_sample_size: usize,
    seed: u64,
) -> Result<GofReport> {
    spec.validate()?;
    if replicates == 0 || mc_sample_size == 0 {
        return Err(Error::InvalidArgument(
            "replicates and Monte-Carlo sample size must be positive".into(),
        ));
    }
    let interior = sample.interior_limits();
    let observed = match statistic {
        Statistic::Ks => ks_grouped(sample, spec, unit)?,
        Statistic::Chi2 => {
            let expected = expected_counts_for_limits(spec, &interior, sample.total(unit));
            let (o, e) = merge_sparse_classes(&sample.frequencies(unit), &expected, MIN_PREDICTED);
            chi2_statistic(&o, &e)?
        }
    };
    let expected_mc = expected_counts_for_limits(spec, &interior, mc_sample_size as f64);

    let exceed = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let draws = spec
                .sample_with(&mut rng, mc_sample_size)
                .expect("validated spec and positive size");
            let mut counts = vec![0.0; interior.len() + 1];
            for x in draws {
                counts[interior.partition_point(|&z| z < x)] += 1.0;
            }
            let stat = match statistic {
                Statistic::Ks => ks_from_counts(&counts, &interior, spec),
                Statistic::Chi2 => chi2_from_counts(&counts, &expected_mc),
            };
            usize::from(stat > observed)
        })
        .sum::<usize>();

    Ok(GofReport {
        statistic_name: statistic,
        observed_value: observed,
        p_value: exceed as f64 / replicates as f64,
        replicates,
        mc_sample_size,
        seed,
    })
}
