//! Lorenz curves, Gini coefficients and top expenditure shares.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, DistributionSpec, MixtureParams};
use crate::error::{Error, Result};
use crate::grouped_data::{GroupedSample, Unit};
use crate::numeric::brent;

/// Cumulative population share `P` against cumulative expenditure share `Q`,
/// starting at `(0, 0)` and ending at `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    pub points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["P", "Q"])?;
        for (p, q) in &self.points {
            w.write_record([p.to_string(), q.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiniMethod {
    GroupedTrapezoid,
    PairwiseSample,
}

/// Gini coefficient in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniEstimate {
    pub value: f64,
    pub method: GiniMethod,
}

fn cumulative_curve(weights: &[f64], amounts: &[f64]) -> LorenzCurve {
    let wt: f64 = weights.iter().sum();
    let at: f64 = amounts.iter().sum();
    let mut points = Vec::with_capacity(weights.len() + 1);
    points.push((0.0, 0.0));
    let (mut p, mut q) = (0.0, 0.0);
    for (w, a) in weights.iter().zip(amounts) {
        p += w;
        q += a;
        points.push((p / wt, q / at));
    }
    // pin the terminal point against rounding drift
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    LorenzCurve { points }
}

/// Lorenz curve of a grouped table with class shares `p_i = f_i / N` and
/// expenditure shares proportional to `p_i * mean_i`.
pub fn lorenz_from_grouped(sample: &GroupedSample, unit: Unit) -> Result<LorenzCurve> {
    let means = sample.class_means()?;
    let p = sample.proportions(unit);
    let amounts: Vec<f64> = p.iter().zip(&means).map(|(a, b)| a * b).collect();
    Ok(cumulative_curve(&p, &amounts))
}

/// Step Lorenz curve of raw values, one point per ordered observation.
pub fn lorenz_from_values(values: &[f64]) -> Result<LorenzCurve> {
    let sorted = sorted_nonnegative(values)?;
    Ok(cumulative_curve(&vec![1.0; sorted.len()], &sorted))
}

/// `(1 - 2A) * 100`, with `A` the trapezoid area under the curve.
pub fn gini_from_lorenz(curve: &LorenzCurve) -> GiniEstimate {
    let area: f64 = curve
        .points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    GiniEstimate {
        value: (1.0 - 2.0 * area) * 100.0,
        method: GiniMethod::GroupedTrapezoid,
    }
}

fn sorted_nonnegative(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "{} values, need at least 2",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "values must be finite and nonnegative, got {v}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.par_sort_unstable_by(f64::total_cmp);
    if sorted.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateSample("all values are zero".into()));
    }
    Ok(sorted)
}

/// Mean absolute difference over twice the mean, in percent, via the
/// sorted form `sum (2i - n - 1) x_(i) / (n * sum x)`.
pub fn gini_pairwise(values: &[f64]) -> Result<GiniEstimate> {
    let sorted = sorted_nonnegative(values)?;
    Ok(GiniEstimate {
        value: gini_of_sorted(&sorted) * 100.0,
        method: GiniMethod::PairwiseSample,
    })
}

fn gini_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    weighted / (n * total)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )))
    }
}

/// Share of the total held by the largest `round(fraction * n)` values.
pub fn top_share_of_values(values: &[f64], fraction: f64) -> Result<f64> {
    check_fraction(fraction)?;
    let sorted = sorted_nonnegative(values)?;
    let k = ((fraction * sorted.len() as f64).round() as usize).max(1);
    let total: f64 = sorted.iter().sum();
    let top: f64 = sorted[sorted.len() - k..].iter().sum();
    Ok(top / total)
}

/// Monte-Carlo top share from `n` draws of `spec`.
pub fn top_share(spec: &DistributionSpec, fraction: f64, n: usize, seed: u64) -> Result<f64> {
    check_fraction(fraction)?;
    spec.validate()?;
    spec.mean().ok_or(Error::UndefinedMean)?;
    top_share_of_values(&spec.sample(n, seed)?, fraction)
}

/// Exact top share of the population distribution, `E[X; X > q] / E[X]`
/// with `q` the `1 - fraction` quantile.
pub fn population_top_share(spec: &DistributionSpec, fraction: f64) -> Result<f64> {
    check_fraction(fraction)?;
    let mean = spec.mean().ok_or(Error::UndefinedMean)?;
    let q = spec.quantile(1.0 - fraction)?;
    Ok(spec.tail_first_moment(q).ok_or(Error::UndefinedMean)? / mean)
}

/// Pairwise Gini of `n` draws from `spec`.
pub fn simulation_gini(spec: &DistributionSpec, n: usize, seed: u64) -> Result<GiniEstimate> {
    spec.validate()?;
    spec.mean().ok_or(Error::UndefinedMean)?;
    gini_pairwise(&spec.sample(n, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub runs: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

/// `repeats` independent runs of [`simulation_gini`]; run `r` uses stream
/// `r` of the generator keyed by `seed`.
pub fn simulation_gini_repeated(
    spec: &DistributionSpec,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    spec.validate()?;
    spec.mean().ok_or(Error::UndefinedMean)?;
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeat count must be positive".into()));
    }
    let runs = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            gini_pairwise(&spec.sample_with(&mut rng, n)?).map(|g| g.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / k;
    let std_dev = if runs.len() > 1 {
        (runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SimulationSummary {
        mean,
        std_dev,
        runs,
        n,
        seed,
    })
}

/// Tail cutoff `x0` at which the mixture's exact top-`fraction` share
/// equals `target`, other parameters held fixed.
pub fn calibrate_tail_cutoff(base: MixtureParams, fraction: f64, target: f64) -> Result<f64> {
    check_fraction(fraction)?;
    let share_at = |log_x0: f64| {
        let spec = DistributionSpec::Mixture(MixtureParams {
            x0: log_x0.exp(),
            ..base
        });
        population_top_share(&spec, fraction).map_or(f64::NAN, |s| s - target)
    };
    let (lo, hi) = ((base.x_m / 100.0).ln(), (base.x_m * 100.0).ln());
    brent(share_at, lo, hi, 1e-12, 200)
        .map(f64::exp)
        .ok_or_else(|| Error::InvalidArgument(format!("no cutoff in range reaches top share {target}")))
}
