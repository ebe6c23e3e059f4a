//! Kernel density estimates from grouped tables. Each class contributes a
//! Gaussian kernel on the log scale, centred at its log class mean and
//! weighted by its population share.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouped_data::{GroupedSample, Unit};
use crate::numeric::{normal_cdf, normal_pdf};

pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Level,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub scale: Scale,
}

impl KdeCurve {
    /// Trapezoid integral of the density over the grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Converts a log-scale curve to expenditure levels via
    /// `f_X(x) = f_log(log x) / x`. Level curves are returned unchanged.
    pub fn to_level(&self) -> KdeCurve {
        match self.scale {
            Scale::Level => self.clone(),
            Scale::Log => {
                let grid: Vec<f64> = self.grid.iter().map(|g| g.exp()).collect();
                let density = self.density.iter().zip(&grid).map(|(d, x)| d / x).collect();
                KdeCurve {
                    grid,
                    density,
                    bandwidth: self.bandwidth,
                    scale: Scale::Level,
                }
            }
        }
    }

    pub fn peak(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    /// Two-column CSV `x,density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "density"])?;
        for (x, d) in self.grid.iter().zip(&self.density) {
            w.write_record([x.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Gaussian rule of thumb `0.9 * sigma * n^(-1/5)`.
pub fn silverman_bandwidth(sigma_log: f64, n: usize) -> Result<f64> {
    if !(sigma_log > 0.0 && sigma_log.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma_log}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("bandwidth rule needs n >= 2, got {n}")));
    }
    Ok(0.9 * sigma_log * (n as f64).powf(-0.2))
}

/// Frequency-weighted standard deviation of the log class means.
pub fn log_spread(sample: &GroupedSample, unit: Unit) -> Result<f64> {
    let means = sample.class_means()?;
    let p = sample.proportions(unit);
    let centre: f64 = means.iter().zip(&p).map(|(m, w)| w * m.ln()).sum();
    let var: f64 = means.iter().zip(&p).map(|(m, w)| w * (m.ln() - centre).powi(2)).sum();
    Ok(var.sqrt())
}

/// Rule-of-thumb bandwidth for one table, with `n` taken as the number of
/// classes (the number of kernels actually placed).
pub fn bandwidth_for(sample: &GroupedSample, unit: Unit) -> Result<f64> {
    silverman_bandwidth(log_spread(sample, unit)?, sample.len())
}

/// One bandwidth for a series of tables: the rule applied to the mean log
/// spread and the mean class count. Tables without class means are skipped.
pub fn pooled_bandwidth(samples: &[GroupedSample], unit: Unit) -> Result<f64> {
    let usable: Vec<&GroupedSample> = samples.iter().filter(|s| s.has_class_means()).collect();
    if usable.is_empty() {
        return Err(Error::MissingClassMeans);
    }
    let mut sigma = 0.0;
    let mut n = 0.0;
    for s in &usable {
        sigma += log_spread(s, unit)?;
        n += s.len() as f64;
    }
    let k = usable.len() as f64;
    silverman_bandwidth(sigma / k, (n / k).round() as usize)
}

/// Evenly spaced log-scale grid from the smallest log location minus `3h`
/// to `log(2 * largest class mean) + 3h`.
pub fn default_grid(sample: &GroupedSample, bandwidth: f64, points: usize) -> Result<Vec<f64>> {
    let means = sample.class_means()?;
    let lowest = sample
        .classes()
        .iter()
        .map(|c| c.lower)
        .filter(|&l| l > 0.0)
        .chain(means.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let highest = means.iter().copied().fold(0.0, f64::max);
    let a = lowest.ln() - 3.0 * bandwidth;
    let b = (2.0 * highest).ln() + 3.0 * bandwidth;
    Ok(linspace(a, b, points.max(2)))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

/// Density of log expenditure on `grid`. With `truncated`, each kernel is
/// cut to its class's log limits and rescaled to keep the class share.
pub fn grouped_kde(
    sample: &GroupedSample,
    unit: Unit,
    bandwidth: f64,
    grid: &[f64],
    truncated: bool,
) -> Result<KdeCurve> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let centres: Vec<f64> = sample.class_means()?.iter().map(|m| m.ln()).collect();
    let weights = sample.proportions(unit);
    let kernels: Vec<Kernel> = sample
        .classes()
        .iter()
        .zip(centres.iter().zip(&weights))
        .map(|(c, (&t, &w))| {
            let (lo, hi) = if truncated {
                let lo = if c.lower > 0.0 { c.lower.ln() } else { f64::NEG_INFINITY };
                (lo, c.upper.ln())
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            let mass = normal_cdf((hi - t) / bandwidth) - normal_cdf((lo - t) / bandwidth);
            Kernel {
                centre: t,
                weight: w / mass,
                lo,
                hi,
            }
        })
        .collect();
    let density = grid
        .par_iter()
        .map(|&g| {
            kernels
                .iter()
                .filter(|k| g >= k.lo && g <= k.hi)
                .map(|k| k.weight * normal_pdf((g - k.centre) / bandwidth) / bandwidth)
                .sum()
        })
        .collect();
    Ok(KdeCurve {
        grid: grid.to_vec(),
        density,
        bandwidth,
        scale: Scale::Log,
    })
}

struct Kernel {
    centre: f64,
    weight: f64,
    lo: f64,
    hi: f64,
}

/// Convex combination `rural_share * rural + (1 - rural_share) * urban`.
pub fn pool_national(rural: &KdeCurve, urban: &KdeCurve, rural_share: f64) -> Result<KdeCurve> {
    if !(0.0..=1.0).contains(&rural_share) {
        return Err(Error::InvalidArgument(format!(
            "rural share {rural_share} outside [0, 1]"
        )));
    }
    if rural.scale != urban.scale || rural.grid != urban.grid {
        return Err(Error::GridMismatch);
    }
    let density = rural
        .density
        .iter()
        .zip(&urban.density)
        .map(|(r, u)| rural_share * r + (1.0 - rural_share) * u)
        .collect();
    Ok(KdeCurve {
        grid: rural.grid.clone(),
        density,
        bandwidth: rural.bandwidth.max(urban.bandwidth),
        scale: rural.scale,
    })
}

/// Curves for a series of tables on a shared grid. Tables without class
/// means are skipped with a warning.
pub fn kde_series(
    samples: &[GroupedSample],
    unit: Unit,
    bandwidth: f64,
    grid: &[f64],
    truncated: bool,
) -> Result<Vec<(String, KdeCurve)>> {
    let mut out = Vec::new();
    for s in samples {
        if !s.has_class_means() {
            log::warn!("round {} has no class means; skipped", s.round_label());
            continue;
        }
        out.push((
            s.round_label().to_string(),
            grouped_kde(s, unit, bandwidth, grid, truncated)?,
        ));
    }
    Ok(out)
}
