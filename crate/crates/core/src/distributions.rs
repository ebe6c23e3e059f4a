//! Parametric expenditure families: lognormal, Pareto, the lognormal+Pareto
//! mixture, double Pareto, exponential, gamma and Weibull.
//!
//! All functions are pure in their arguments. Public entry points validate
//! the parameter set; the `*_raw` variants skip validation and are used in
//! hot loops after a single up-front check.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::{brent, normal_cdf, normal_pdf, normal_quantile, normal_sf};

/// Parameters of `pi * Pareto(nu, x0) + (1 - pi) * Lognormal(x_M, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Median of the lognormal body, `e^mu`.
    #[serde(rename = "x_M")]
    pub x_m: f64,
    /// Log-variance of the body.
    pub sigma2: f64,
    /// Pareto exponent.
    pub nu: f64,
    /// Tail cutoff.
    pub x0: f64,
    /// Weight of the Pareto component.
    pub pi: f64,
}

/// Double Pareto with its kink at `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleParetoParams {
    /// Upper-tail exponent.
    pub alpha: f64,
    /// Lower-tail exponent.
    pub beta: f64,
    pub scale: f64,
}

/// Family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lognormal,
    Pareto,
    Mixture,
    DoublePareto,
    Exponential,
    Gamma,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Lognormal,
        Family::Pareto,
        Family::Mixture,
        Family::DoublePareto,
        Family::Exponential,
        Family::Gamma,
        Family::Weibull,
    ];

    /// Number of free parameters estimated for this family.
    pub fn n_params(self) -> usize {
        match self {
            Family::Exponential => 1,
            Family::Lognormal | Family::Pareto | Family::Gamma | Family::Weibull => 2,
            Family::DoublePareto => 3,
            Family::Mixture => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Lognormal => "lognormal",
            Family::Pareto => "pareto",
            Family::Mixture => "mixture",
            Family::DoublePareto => "double_pareto",
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
            Family::Weibull => "weibull",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family {s:?}")))
    }
}

/// A member of one of the supported families.
///
/// Serializes as `{"family": "...", "params": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DistributionSpec {
    Lognormal {
        #[serde(rename = "x_M")]
        x_m: f64,
        sigma2: f64,
    },
    Pareto {
        nu: f64,
        x0: f64,
    },
    Mixture(MixtureParams),
    DoublePareto(DoubleParetoParams),
    Exponential {
        rate: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    Weibull {
        k: f64,
        lambda: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// Generator for one replicate stream: a fixed seed plus a stream index,
/// so parallel replicates do not depend on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl DistributionSpec {
    pub fn mixture(x_m: f64, sigma2: f64, nu: f64, x0: f64, pi: f64) -> Self {
        DistributionSpec::Mixture(MixtureParams {
            x_m,
            sigma2,
            nu,
            x0,
            pi,
        })
    }

    pub fn double_pareto(alpha: f64, beta: f64, scale: f64) -> Self {
        DistributionSpec::DoublePareto(DoubleParetoParams { alpha, beta, scale })
    }

    pub fn family(&self) -> Family {
        match self {
            DistributionSpec::Lognormal { .. } => Family::Lognormal,
            DistributionSpec::Pareto { .. } => Family::Pareto,
            DistributionSpec::Mixture(_) => Family::Mixture,
            DistributionSpec::DoublePareto(_) => Family::DoublePareto,
            DistributionSpec::Exponential { .. } => Family::Exponential,
            DistributionSpec::Gamma { .. } => Family::Gamma,
            DistributionSpec::Weibull { .. } => Family::Weibull,
        }
    }

    /// Named parameter values, in the order used for serialization.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => vec![("x_M", x_m), ("sigma2", sigma2)],
            DistributionSpec::Pareto { nu, x0 } => vec![("nu", nu), ("x0", x0)],
            DistributionSpec::Mixture(m) => vec![
                ("x_M", m.x_m),
                ("sigma2", m.sigma2),
                ("nu", m.nu),
                ("x0", m.x0),
                ("pi", m.pi),
            ],
            DistributionSpec::DoublePareto(d) => {
                vec![("alpha", d.alpha), ("beta", d.beta), ("scale", d.scale)]
            }
            DistributionSpec::Exponential { rate } => vec![("rate", rate)],
            DistributionSpec::Gamma { shape, scale } => vec![("shape", shape), ("scale", scale)],
            DistributionSpec::Weibull { k, lambda } => vec![("k", k), ("lambda", lambda)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => {
                positive("x_M", x_m)?;
                positive("sigma2", sigma2)
            }
            DistributionSpec::Pareto { nu, x0 } => {
                positive("nu", nu)?;
                positive("x0", x0)
            }
            DistributionSpec::Mixture(m) => {
                positive("x_M", m.x_m)?;
                positive("sigma2", m.sigma2)?;
                positive("nu", m.nu)?;
                positive("x0", m.x0)?;
                if (0.0..=1.0).contains(&m.pi) {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("pi must lie in [0, 1], got {}", m.pi)))
                }
            }
            DistributionSpec::DoublePareto(d) => {
                positive("alpha", d.alpha)?;
                positive("beta", d.beta)?;
                positive("scale", d.scale)
            }
            DistributionSpec::Exponential { rate } => positive("rate", rate),
            DistributionSpec::Gamma { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            DistributionSpec::Weibull { k, lambda } => {
                positive("k", k)?;
                positive("lambda", lambda)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.pdf_raw(x))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.cdf_raw(x))
    }

    /// Survival function `1 - cdf(x)`, computed without cancellation in the tail.
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.sf_raw(x))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must lie in (0, 1), got {p}"
            )));
        }
        Ok(self.quantile_raw(p))
    }

    /// Closed-form mean; `None` when it does not exist.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => Some(x_m * (0.5 * sigma2).exp()),
            DistributionSpec::Pareto { nu, x0 } => (nu > 1.0).then(|| nu * x0 / (nu - 1.0)),
            DistributionSpec::Mixture(m) => {
                let body = m.x_m * (0.5 * m.sigma2).exp();
                if m.pi == 0.0 {
                    Some(body)
                } else if m.nu > 1.0 {
                    Some(m.pi * m.nu * m.x0 / (m.nu - 1.0) + (1.0 - m.pi) * body)
                } else {
                    None
                }
            }
            DistributionSpec::DoublePareto(d) => (d.alpha > 1.0).then(|| {
                let c = d.alpha * d.beta / (d.alpha + d.beta);
                d.scale * (c / (d.beta + 1.0) + c / (d.alpha - 1.0))
            }),
            DistributionSpec::Exponential { rate } => Some(1.0 / rate),
            DistributionSpec::Gamma { shape, scale } => Some(shape * scale),
            DistributionSpec::Weibull { k, lambda } => Some(lambda * gamma(1.0 + 1.0 / k)),
        }
    }

    /// Partial first moment `E[X; X > t]`; `None` when the mean is undefined.
    pub fn tail_first_moment(&self, t: f64) -> Option<f64> {
        let mean = self.mean()?;
        if t <= 0.0 {
            return Some(mean);
        }
        Some(match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => lognormal_tail_moment(x_m, sigma2, t),
            DistributionSpec::Pareto { nu, x0 } => pareto_tail_moment(nu, x0, t),
            DistributionSpec::Mixture(m) => {
                let body = (1.0 - m.pi) * lognormal_tail_moment(m.x_m, m.sigma2, t);
                if m.pi == 0.0 {
                    body
                } else {
                    m.pi * pareto_tail_moment(m.nu, m.x0, t) + body
                }
            }
            DistributionSpec::DoublePareto(d) => {
                let c = d.alpha * d.beta / (d.alpha + d.beta);
                let y = t / d.scale;
                let upper = if y >= 1.0 {
                    c * y.powf(1.0 - d.alpha) / (d.alpha - 1.0)
                } else {
                    c / (d.alpha - 1.0) + c * (1.0 - y.powf(d.beta + 1.0)) / (d.beta + 1.0)
                };
                d.scale * upper
            }
            DistributionSpec::Exponential { rate } => (t + 1.0 / rate) * (-rate * t).exp(),
            DistributionSpec::Gamma { shape, scale } => shape * scale * gamma_ur(shape + 1.0, t / scale),
            DistributionSpec::Weibull { k, lambda } => {
                let a = 1.0 + 1.0 / k;
                lambda * gamma(a) * gamma_ur(a, (t / lambda).powf(k))
            }
        })
    }

    /// `n` draws from a generator seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let sampler = Sampler::new(self);
        Ok((0..n).map(|_| sampler.draw(rng)).collect())
    }

    pub(crate) fn pdf_raw(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => lognormal_pdf(x_m, sigma2, x),
            DistributionSpec::Pareto { nu, x0 } => pareto_pdf(nu, x0, x),
            DistributionSpec::Mixture(m) => {
                m.pi * pareto_pdf(m.nu, m.x0, x) + (1.0 - m.pi) * lognormal_pdf(m.x_m, m.sigma2, x)
            }
            DistributionSpec::DoublePareto(d) => {
                let c = d.alpha * d.beta / (d.alpha + d.beta);
                let y = x / d.scale;
                let v = if y <= 1.0 {
                    c * y.powf(d.beta - 1.0)
                } else {
                    c * y.powf(-d.alpha - 1.0)
                };
                v / d.scale
            }
            DistributionSpec::Exponential { rate } => rate * (-rate * x).exp(),
            DistributionSpec::Gamma { shape, scale } => {
                let y = x / scale;
                ((shape - 1.0) * y.ln() - y - ln_gamma(shape)).exp() / scale
            }
            DistributionSpec::Weibull { k, lambda } => {
                let y = x / lambda;
                (k / lambda) * y.powf(k - 1.0) * (-y.powf(k)).exp()
            }
        }
    }

    pub(crate) fn cdf_raw(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => normal_cdf(log_z(x_m, sigma2, x)),
            DistributionSpec::Pareto { nu, x0 } => pareto_cdf(nu, x0, x),
            DistributionSpec::Mixture(m) => {
                m.pi * pareto_cdf(m.nu, m.x0, x) + (1.0 - m.pi) * normal_cdf(log_z(m.x_m, m.sigma2, x))
            }
            DistributionSpec::DoublePareto(d) => {
                let y = x / d.scale;
                let s = d.alpha + d.beta;
                if y <= 1.0 {
                    d.alpha / s * y.powf(d.beta)
                } else {
                    1.0 - d.beta / s * y.powf(-d.alpha)
                }
            }
            DistributionSpec::Exponential { rate } => -(-rate * x).exp_m1(),
            DistributionSpec::Gamma { shape, scale } => gamma_lr(shape, x / scale),
            DistributionSpec::Weibull { k, lambda } => -(-(x / lambda).powf(k)).exp_m1(),
        }
    }

    pub(crate) fn sf_raw(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 1.0;
        }
        if x.is_infinite() {
            return 0.0;
        }
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => normal_sf(log_z(x_m, sigma2, x)),
            DistributionSpec::Pareto { nu, x0 } => pareto_sf(nu, x0, x),
            DistributionSpec::Mixture(m) => {
                m.pi * pareto_sf(m.nu, m.x0, x) + (1.0 - m.pi) * normal_sf(log_z(m.x_m, m.sigma2, x))
            }
            DistributionSpec::DoublePareto(d) => {
                let y = x / d.scale;
                let s = d.alpha + d.beta;
                if y <= 1.0 {
                    1.0 - d.alpha / s * y.powf(d.beta)
                } else {
                    d.beta / s * y.powf(-d.alpha)
                }
            }
            DistributionSpec::Exponential { rate } => (-rate * x).exp(),
            DistributionSpec::Gamma { shape, scale } => gamma_ur(shape, x / scale),
            DistributionSpec::Weibull { k, lambda } => (-(x / lambda).powf(k)).exp(),
        }
    }

    pub(crate) fn quantile_raw(&self, p: f64) -> f64 {
        match *self {
            DistributionSpec::Lognormal { x_m, sigma2 } => x_m * (sigma2.sqrt() * normal_quantile(p)).exp(),
            DistributionSpec::Pareto { nu, x0 } => x0 * (1.0 - p).powf(-1.0 / nu),
            DistributionSpec::DoublePareto(d) => {
                let s = d.alpha + d.beta;
                let knee = d.alpha / s;
                if p <= knee {
                    d.scale * (p / knee).powf(1.0 / d.beta)
                } else {
                    d.scale * ((1.0 - p) * s / d.beta).powf(-1.0 / d.alpha)
                }
            }
            DistributionSpec::Exponential { rate } => -(-p).ln_1p() / rate,
            DistributionSpec::Weibull { k, lambda } => lambda * (-(-p).ln_1p()).powf(1.0 / k),
            DistributionSpec::Mixture(_) | DistributionSpec::Gamma { .. } => self.quantile_by_root(p),
        }
    }

    /// Inverts the CDF on the log scale by bracketed root-finding. Levels
    /// above one half are matched through the survival function.
    fn quantile_by_root(&self, p: f64) -> f64 {
        let target = |u: f64| {
            let x = u.exp();
            if p <= 0.5 {
                self.cdf_raw(x) - p
            } else {
                (1.0 - p) - self.sf_raw(x)
            }
        };
        let guess = match *self {
            DistributionSpec::Mixture(m) => m.x_m.ln(),
            DistributionSpec::Gamma { shape, scale } => (shape * scale).ln(),
            _ => 0.0,
        };
        let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
        let mut step = 1.0;
        while target(lo) > 0.0 && lo > -745.0 {
            step *= 2.0;
            lo -= step;
        }
        step = 1.0;
        while target(hi) < 0.0 && hi < 709.0 {
            step *= 2.0;
            hi += step;
        }
        brent(target, lo, hi, 1e-15, 500).map_or(f64::NAN, f64::exp)
    }
}

fn log_z(x_m: f64, sigma2: f64, x: f64) -> f64 {
    (x.ln() - x_m.ln()) / sigma2.sqrt()
}

fn lognormal_pdf(x_m: f64, sigma2: f64, x: f64) -> f64 {
    let sigma = sigma2.sqrt();
    normal_pdf(log_z(x_m, sigma2, x)) / (x * sigma)
}

fn lognormal_tail_moment(x_m: f64, sigma2: f64, t: f64) -> f64 {
    let mean = x_m * (0.5 * sigma2).exp();
    if t <= 0.0 {
        return mean;
    }
    let sigma = sigma2.sqrt();
    mean * normal_sf(log_z(x_m, sigma2, t) - sigma)
}

fn pareto_pdf(nu: f64, x0: f64, x: f64) -> f64 {
    if x > x0 {
        nu / x0 * (x0 / x).powf(nu + 1.0)
    } else {
        0.0
    }
}

fn pareto_cdf(nu: f64, x0: f64, x: f64) -> f64 {
    if x > x0 {
        -(nu * (x0 / x).ln()).exp_m1()
    } else {
        0.0
    }
}

fn pareto_sf(nu: f64, x0: f64, x: f64) -> f64 {
    if x > x0 {
        (x0 / x).powf(nu)
    } else {
        1.0
    }
}

fn pareto_tail_moment(nu: f64, x0: f64, t: f64) -> f64 {
    let a = t.max(x0);
    nu * x0.powf(nu) * a.powf(1.0 - nu) / (nu - 1.0)
}

/// Draws from a validated spec. Continuous components use inverse-CDF
/// sampling except the lognormal body (normal deviates) and the gamma.
enum Sampler {
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    Mixture {
        mu: f64,
        sigma: f64,
        nu: f64,
        x0: f64,
        pi: f64,
    },
    Gamma(rand_distr::Gamma<f64>),
    Inverse(DistributionSpec),
}

impl Sampler {
    fn new(spec: &DistributionSpec) -> Self {
        match *spec {
            DistributionSpec::Lognormal { x_m, sigma2 } => Sampler::Lognormal {
                mu: x_m.ln(),
                sigma: sigma2.sqrt(),
            },
            DistributionSpec::Mixture(m) => Sampler::Mixture {
                mu: m.x_m.ln(),
                sigma: m.sigma2.sqrt(),
                nu: m.nu,
                x0: m.x0,
                pi: m.pi,
            },
            DistributionSpec::Gamma { shape, scale } => {
                Sampler::Gamma(rand_distr::Gamma::new(shape, scale).expect("validated gamma parameters"))
            }
            other => Sampler::Inverse(other),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            Sampler::Mixture { mu, sigma, nu, x0, pi } => {
                if rng.random::<f64>() < *pi {
                    // 1 - u lies in (0, 1]
                    let v = 1.0 - rng.random::<f64>();
                    x0 * v.powf(-1.0 / nu)
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    (mu + sigma * z).exp()
                }
            }
            Sampler::Gamma(g) => g.sample(rng),
            Sampler::Inverse(spec) => {
                let mut u: f64 = rng.random();
                while u == 0.0 {
                    u = rng.random();
                }
                spec.quantile_raw(u)
            }
        }
    }
}
