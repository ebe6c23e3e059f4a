//! Minimum-χ² fitting of parametric families to grouped tables, and the
//! log-linear Weibull grid regression.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::grouped_data::{GroupedSample, Unit};
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Predicted counts below this are folded into a neighbouring class.
pub const MIN_PREDICTED: f64 = 1e-6;

/// Distance from a box edge (0 for positive parameters, 0 or 1 for `pi`)
/// below which a fitted parameter is flagged as sitting on the boundary.
pub const BOUNDARY_MARGIN: f64 = 1e-3;

/// Expected counts per class, `N * (F(z_i) - F(z_{i-1}))`, where `N` is the
/// tabulated total of the chosen unit. The open top class receives the
/// model's survival mass.
pub fn expected_class_counts(spec: &DistributionSpec, sample: &GroupedSample, unit: Unit) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(expected_counts_for_limits(
        spec,
        &sample.interior_limits(),
        sample.total(unit),
    ))
}

/// Expected counts for the classes `(0, z_1], (z_1, z_2], ..., (z_{k-1}, inf)`.
/// `spec` must already be valid.
pub fn expected_counts_for_limits(spec: &DistributionSpec, interior: &[f64], total: f64) -> Vec<f64> {
    let mut counts = Vec::with_capacity(interior.len() + 1);
    let mut prev_cdf = 0.0;
    let mut prev_sf = 1.0;
    for &z in interior {
        let cdf = spec.cdf_raw(z);
        let sf = spec.sf_raw(z);
        // difference the smaller of the two tails to avoid cancellation
        let mass = if prev_cdf > 0.5 { prev_sf - sf } else { cdf - prev_cdf };
        counts.push(total * mass.max(0.0));
        prev_cdf = cdf;
        prev_sf = sf;
    }
    counts.push(total * prev_sf.max(0.0));
    counts
}

/// Pearson's statistic `sum (o - e)^2 / e`.
pub fn chi2_statistic(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: predicted.len(),
        });
    }
    let mut total = 0.0;
    for (i, (&o, &e)) in observed.iter().zip(predicted).enumerate() {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::DegeneratePrediction { index: i, value: e });
        }
        total += (o - e) * (o - e) / e;
    }
    Ok(total)
}

/// Folds classes whose predicted count is below `threshold` into an
/// adjacent class (the right-hand one, or the left-hand one for the last
/// class) until every remaining prediction clears the threshold.
pub fn merge_sparse_classes(observed: &[f64], predicted: &[f64], threshold: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs = observed.to_vec();
    let mut pred = predicted.to_vec();
    while pred.len() > 1 {
        let Some(i) = pred.iter().position(|&p| !(p >= threshold)) else {
            break;
        };
        let j = if i + 1 < pred.len() { i + 1 } else { i - 1 };
        obs[j] += obs[i];
        pred[j] += pred[i];
        obs.remove(i);
        pred.remove(i);
    }
    (obs, pred)
}

/// χ² of the sample against `spec`, after merging sparse predicted classes.
pub fn chi2_at(spec: &DistributionSpec, sample: &GroupedSample, unit: Unit) -> Result<f64> {
    let predicted = expected_class_counts(spec, sample, unit)?;
    let (obs, pred) = merge_sparse_classes(&sample.frequencies(unit), &predicted, MIN_PREDICTED);
    chi2_statistic(&obs, &pred)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Seed for the jittered extra starts.
    pub seed: u64,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Simplex diameter tolerance in transformed coordinates.
    pub tol: f64,
    /// Number of randomly perturbed copies of the grid starts.
    pub jitter_starts: usize,
    /// Standard deviation of the perturbation in transformed coordinates.
    pub jitter_scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: crate::DEFAULT_SEED,
            max_evals: 10_000,
            tol: 1e-8,
            jitter_starts: 8,
            jitter_scale: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub spec: DistributionSpec,
    pub chi2: f64,
    pub n_classes: usize,
    pub n_params: usize,
    pub starts_tried: usize,
    pub converged: bool,
    /// Names of parameters within `BOUNDARY_MARGIN` of a box edge.
    pub at_boundary: Vec<String>,
}

/// Maps a spec to unconstrained coordinates: logs of positive parameters,
/// logit of the mixture weight.
pub fn to_free(spec: &DistributionSpec) -> Vec<f64> {
    match *spec {
        DistributionSpec::Mixture(m) => vec![m.x_m.ln(), m.sigma2.ln(), m.nu.ln(), m.x0.ln(), logit(m.pi)],
        _ => spec.params().iter().map(|(_, v)| v.ln()).collect(),
    }
}

/// Inverse of [`to_free`].
pub fn from_free(family: Family, u: &[f64]) -> DistributionSpec {
    let e = |i: usize| u[i].exp();
    match family {
        Family::Lognormal => DistributionSpec::Lognormal {
            x_m: e(0),
            sigma2: e(1),
        },
        Family::Pareto => DistributionSpec::Pareto { nu: e(0), x0: e(1) },
        Family::Mixture => DistributionSpec::mixture(e(0), e(1), e(2), e(3), expit(u[4])),
        Family::DoublePareto => DistributionSpec::double_pareto(e(0), e(1), e(2)),
        Family::Exponential => DistributionSpec::Exponential { rate: e(0) },
        Family::Gamma => DistributionSpec::Gamma {
            shape: e(0),
            scale: e(1),
        },
        Family::Weibull => DistributionSpec::Weibull { k: e(0), lambda: e(1) },
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn expit(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Location summaries used to seed the optimizer.
struct SampleSummary {
    median: f64,
    mean: f64,
    log_var: f64,
    interior: Vec<f64>,
}

fn representative_points(sample: &GroupedSample) -> Vec<f64> {
    sample
        .classes()
        .iter()
        .map(|c| match c.class_mean {
            Some(m) => m,
            None if c.upper.is_finite() => 0.5 * (c.lower + c.upper),
            None => 1.5 * c.lower,
        })
        .map(|x| x.max(1e-9))
        .collect()
}

fn summarize(sample: &GroupedSample, unit: Unit) -> SampleSummary {
    let x = representative_points(sample);
    let p = sample.proportions(unit);
    let mut cum = 0.0;
    let mut median = *x.last().unwrap();
    for (xi, pi) in x.iter().zip(&p) {
        cum += pi;
        if cum >= 0.5 {
            median = *xi;
            break;
        }
    }
    let mean: f64 = x.iter().zip(&p).map(|(a, b)| a * b).sum();
    let log_mean: f64 = x.iter().zip(&p).map(|(a, b)| a.ln() * b).sum();
    let log_var: f64 = x
        .iter()
        .zip(&p)
        .map(|(a, b)| b * (a.ln() - log_mean).powi(2))
        .sum::<f64>()
        .max(0.01);
    SampleSummary {
        median,
        mean,
        log_var,
        interior: sample.interior_limits().into_iter().filter(|z| *z > 0.0).collect(),
    }
}

fn grid_starts(family: Family, s: &SampleSummary) -> Vec<DistributionSpec> {
    let mut out = Vec::new();
    match family {
        Family::Lognormal => {
            for f in [0.8, 1.0, 1.25] {
                out.push(DistributionSpec::Lognormal {
                    x_m: s.median * f,
                    sigma2: s.log_var,
                });
            }
        }
        Family::Pareto => {
            for &x0 in &s.interior {
                for nu in [1.5, 2.5] {
                    out.push(DistributionSpec::Pareto { nu, x0 });
                }
            }
        }
        Family::Mixture => {
            for &x0 in &s.interior {
                for pi in [0.05, 0.15, 0.30] {
                    for nu in [1.5, 2.5] {
                        out.push(DistributionSpec::mixture(s.median, s.log_var, nu, x0, pi));
                    }
                }
            }
        }
        Family::DoublePareto => {
            for &scale in &s.interior {
                for alpha in [1.5, 3.0] {
                    for beta in [1.5, 3.0] {
                        out.push(DistributionSpec::double_pareto(alpha, beta, scale));
                    }
                }
            }
        }
        Family::Exponential => {
            for f in [0.5, 1.0, 2.0] {
                out.push(DistributionSpec::Exponential { rate: f / s.mean });
            }
        }
        Family::Gamma => {
            let var = s.mean * s.mean * (s.log_var.exp() - 1.0);
            let shape = s.mean * s.mean / var;
            for f in [0.5, 1.0, 2.0] {
                out.push(DistributionSpec::Gamma {
                    shape: shape * f,
                    scale: var / s.mean / f,
                });
            }
        }
        Family::Weibull => {
            for k in [1.0, 2.0, 3.0, 4.0] {
                out.push(DistributionSpec::Weibull { k, lambda: s.mean });
            }
        }
    }
    out
}

fn boundary_flags(spec: &DistributionSpec) -> Vec<String> {
    spec.params()
        .into_iter()
        .filter(|&(name, v)| v < BOUNDARY_MARGIN || (name == "pi" && v > 1.0 - BOUNDARY_MARGIN))
        .map(|(name, _)| name.to_string())
        .collect()
}

/// Fits `family` to `sample` by minimizing χ² with multi-start Nelder–Mead
/// in transformed coordinates.
///
/// Starts come from a deterministic grid over class boundaries and shape
/// values, from `jitter_starts` seeded perturbations of that grid, and, for
/// the mixture, from the best lognormal and Pareto fits (nested models).
pub fn fit_chi2(sample: &GroupedSample, family: Family, unit: Unit, opts: &FitOptions) -> Result<FitResult> {
    fit_chi2_with_starts(sample, family, unit, opts, &[])
}

/// As [`fit_chi2`], with caller-supplied starting points added to the grid.
pub fn fit_chi2_with_starts(
    sample: &GroupedSample,
    family: Family,
    unit: Unit,
    opts: &FitOptions,
    extra: &[DistributionSpec],
) -> Result<FitResult> {
    let required = family.n_params() + 1;
    if sample.len() < required {
        return Err(Error::TooFewClasses {
            found: sample.len(),
            required,
        });
    }
    for s in extra {
        if s.family() != family {
            return Err(Error::MixedFamilies(format!(
                "start of family {} supplied for a {} fit",
                s.family(),
                family
            )));
        }
        s.validate()?;
    }

    let summary = summarize(sample, unit);
    let mut starts = grid_starts(family, &summary);
    if family == Family::Mixture {
        for nested in [Family::Lognormal, Family::Pareto] {
            let sub = fit_chi2(sample, nested, unit, opts)?;
            starts.push(embed_in_mixture(&sub.spec, &summary));
        }
    }
    starts.extend_from_slice(extra);

    let mut free: Vec<Vec<f64>> = starts.iter().map(to_free).collect();
    let base = free.clone();
    for j in 0..opts.jitter_starts {
        let mut rng = stream_rng(opts.seed, j as u64);
        let mut u = base[j % base.len()].clone();
        for v in &mut u {
            let z: f64 = rng.sample(StandardNormal);
            *v += opts.jitter_scale * z;
        }
        free.push(u);
    }

    let observed = sample.frequencies(unit);
    let interior = sample.interior_limits();
    let total = sample.total(unit);
    let objective = |u: &[f64]| -> f64 {
        let spec = from_free(family, u);
        if spec.validate().is_err() {
            return f64::INFINITY;
        }
        let predicted = expected_counts_for_limits(&spec, &interior, total);
        let (o, p) = merge_sparse_classes(&observed, &predicted, MIN_PREDICTED);
        // merging must leave at least one degree of freedom, otherwise a
        // model with all its mass in one class would score zero
        if o.len() < required {
            return f64::INFINITY;
        }
        chi2_statistic(&o, &p).unwrap_or(f64::INFINITY)
    };

    let nm = NelderMeadOptions {
        max_evals: opts.max_evals,
        tol: opts.tol,
        ..Default::default()
    };
    let results: Vec<_> = free.par_iter().map(|u| nelder_mead(objective, u, &nm)).collect();
    let any_converged = results.iter().any(|m| m.converged);
    let best = results
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::OptimizerFailure(format!(
            "no start reached a finite chi-square for family {family}"
        )));
    }
    let spec = from_free(family, &best.x);
    log::debug!("fit {family}: chi2 {:.6} after {} evals", best.value, best.evals);
    Ok(FitResult {
        spec,
        chi2: best.value,
        n_classes: sample.len(),
        n_params: family.n_params(),
        starts_tried: free.len(),
        converged: any_converged,
        at_boundary: boundary_flags(&spec),
    })
}

fn embed_in_mixture(spec: &DistributionSpec, s: &SampleSummary) -> DistributionSpec {
    match *spec {
        DistributionSpec::Lognormal { x_m, sigma2 } => {
            let x0 = s.interior.last().copied().unwrap_or(s.median * 2.0);
            DistributionSpec::mixture(x_m, sigma2, 2.0, x0, 1e-6)
        }
        DistributionSpec::Pareto { nu, x0 } => DistributionSpec::mixture(s.median, s.log_var, nu, x0, 1.0 - 1e-9),
        other => other,
    }
}

/// Where each class is located on the expenditure axis in the grid regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridLocation {
    #[default]
    Midpoint,
    ClassMean,
}

/// What is regressed: log class proportion, or log proportion per unit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridResponse {
    #[default]
    Proportion,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct WeibullGridConfig {
    pub location: GridLocation,
    pub response: GridResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullGridFit {
    pub k: f64,
    pub lambda: f64,
    pub r2: f64,
}

/// `1.0, 1.1, ..., 5.0`.
pub fn default_k_grid() -> Vec<f64> {
    (10..=50).map(|i| i as f64 / 10.0).collect()
}

/// Weibull fit by regressing the log empirical frequency on `log x` and
/// `x^k` for each `k` in the grid, keeping the `k` with the best R².
///
/// The open top class and empty classes are excluded. Only grid values
/// whose `x^k` coefficient is negative (a decaying tail) are eligible;
/// `lambda = (-c)^(-1/k)`.
pub fn fit_weibull_grid(
    sample: &GroupedSample,
    unit: Unit,
    k_grid: &[f64],
    config: WeibullGridConfig,
) -> Result<WeibullGridFit> {
    if k_grid.is_empty() {
        return Err(Error::InvalidArgument("empty k grid".into()));
    }
    let means = match config.location {
        GridLocation::ClassMean => Some(sample.class_means()?),
        GridLocation::Midpoint => None,
    };
    let total = sample.total(unit);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, c) in sample.classes().iter().enumerate() {
        let f = c.frequency(unit);
        if !c.upper.is_finite() || f <= 0.0 {
            continue;
        }
        let x = match &means {
            Some(m) => m[i],
            None => 0.5 * (c.lower + c.upper),
        };
        let share = f / total;
        let y = match config.response {
            GridResponse::Proportion => share.ln(),
            GridResponse::Density => (share / (c.upper - c.lower)).ln(),
        };
        xs.push(x);
        ys.push(y);
    }
    if xs.len() < 4 {
        return Err(Error::SingularRegression(format!(
            "{} usable classes, need at least 4",
            xs.len()
        )));
    }

    let y = DVector::from_vec(ys);
    let mut best: Option<WeibullGridFit> = None;
    for &k in k_grid {
        let design = DMatrix::from_fn(xs.len(), 3, |r, c| match c {
            0 => 1.0,
            1 => xs[r].ln(),
            _ => xs[r].powf(k),
        });
        let Some((coef, r2)) = ols(&design, &y) else { continue };
        let c = coef[2];
        if !(c < 0.0) {
            continue;
        }
        if best.is_none_or(|b| r2 > b.r2) {
            best = Some(WeibullGridFit {
                k,
                lambda: (-c).powf(-1.0 / k),
                r2,
            });
        }
    }
    best.ok_or_else(|| {
        Error::SingularRegression("no grid value gives a full-rank design with a decaying x^k term".into())
    })
}

/// Least squares with an intercept column; returns coefficients and R².
pub(crate) fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    // columns such as x^5 span many orders of magnitude; equilibrate first
    let scales: Vec<f64> = design
        .column_iter()
        .map(|c| c.amax())
        .map(|m| if m > 0.0 { m } else { 1.0 })
        .collect();
    let mut scaled = design.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return None;
    }
    let mut coef = svd.solve(y, 0.0).ok()?;
    for (c, s) in coef.iter_mut().zip(&scales) {
        *c /= s;
    }
    let fitted = design * &coef;
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let sse: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    Some((coef, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouped_data::ExpenditureClass;

    fn synthetic(spec: &DistributionSpec, limits: &[f64]) -> GroupedSample {
        let counts = expected_counts_for_limits(spec, limits, 1000.0);
        let mut lower = 0.0;
        let classes = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let upper = limits.get(i).copied().unwrap_or(f64::INFINITY);
                let c = ExpenditureClass::new(lower, upper, None, n, n);
                lower = upper;
                c
            })
            .collect();
        GroupedSample::new(classes, Unit::Person).unwrap()
    }

    #[test]
    fn chi2_hand_values() {
        assert_eq!(chi2_statistic(&[12.0, 8.0], &[10.0, 10.0]).unwrap(), 0.8);
        assert_eq!(chi2_statistic(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(matches!(
            chi2_statistic(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            chi2_statistic(&[1.0, 1.0], &[1.0, 0.0]),
            Err(Error::DegeneratePrediction { index: 1, .. })
        ));
    }

    #[test]
    fn merge_folds_empty_classes() {
        let (o, p) = merge_sparse_classes(&[1.0, 2.0, 3.0, 0.0], &[0.0, 4.0, 3.0, 1e-9], MIN_PREDICTED);
        assert_eq!(o, vec![3.0, 3.0]);
        assert_eq!(p, vec![4.0, 3.0 + 1e-9]);
    }

    #[test]
    fn pareto_counts_respect_support() {
        let spec = DistributionSpec::Pareto { nu: 2.0, x0: 500.0 };
        let counts = expected_counts_for_limits(&spec, &[100.0, 200.0, 400.0], 1000.0);
        assert_eq!(&counts[..3], &[0.0, 0.0, 0.0]);
        assert!((counts[3] - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn counts_sum_to_total() {
        let spec = DistributionSpec::mixture(553.0, 0.14, 1.8, 850.0, 0.17);
        let limits = [
            235.0, 270.0, 320.0, 365.0, 410.0, 455.0, 510.0, 580.0, 690.0, 890.0, 1155.0,
        ];
        let s: f64 = expected_counts_for_limits(&spec, &limits, 1000.0).iter().sum();
        assert!((s - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn free_transform_round_trips() {
        let spec = DistributionSpec::mixture(553.0, 0.14, 1.8, 850.0, 0.17);
        let back = from_free(Family::Mixture, &to_free(&spec));
        for ((_, a), (_, b)) in spec.params().iter().zip(back.params().iter()) {
            assert!((a - b).abs() < 1e-9 * a.abs());
        }
    }

    #[test]
    fn recovers_lognormal_from_exact_counts() {
        let truth = DistributionSpec::Lognormal {
            x_m: 600.0,
            sigma2: 0.2,
        };
        let limits = [250.0, 350.0, 450.0, 550.0, 650.0, 800.0, 1000.0, 1400.0];
        let sample = synthetic(&truth, &limits);
        let fit = fit_chi2(&sample, Family::Lognormal, Unit::Person, &FitOptions::default()).unwrap();
        assert!(fit.chi2 < 1e-6, "chi2 {}", fit.chi2);
        if let DistributionSpec::Lognormal { x_m, sigma2 } = fit.spec {
            assert!((x_m / 600.0 - 1.0).abs() < 1e-3);
            assert!((sigma2 / 0.2 - 1.0).abs() < 1e-3);
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn weibull_grid_recovers_shape() {
        let truth = DistributionSpec::Weibull { k: 2.0, lambda: 1000.0 };
        let limits: Vec<f64> = (1..=20).map(|i| i as f64 * 100.0).collect();
        let sample = synthetic(&truth, &limits);
        let fit = fit_weibull_grid(&sample, Unit::Person, &default_k_grid(), WeibullGridConfig::default()).unwrap();
        assert!((fit.k - 2.0).abs() <= 0.1 + 1e-9, "k {}", fit.k);
    }

    #[test]
    fn weibull_grid_needs_means_when_asked() {
        let truth = DistributionSpec::Weibull { k: 2.0, lambda: 1000.0 };
        let limits: Vec<f64> = (1..=10).map(|i| i as f64 * 200.0).collect();
        let sample = synthetic(&truth, &limits);
        let cfg = WeibullGridConfig {
            location: GridLocation::ClassMean,
            response: GridResponse::Density,
        };
        assert!(matches!(
            fit_weibull_grid(&sample, Unit::Person, &[2.0], cfg),
            Err(Error::MissingClassMeans)
        ));
    }
}
