//! Agent simulation of the Cobb–Douglas consumption model. An agent buying
//! `tau` goods with preference weights `delta_i` spends
//! `c = kappa * (1 + delta_2/delta_1 + ... + delta_tau/delta_1)`; only the
//! weight ratios matter, so they are drawn directly.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::stream_rng;
use crate::error::{Error, Result};

/// Agents simulated per generator stream.
const CHUNK: usize = 16_384;

/// Minimum number of order statistics the Hill estimator will average.
pub const MIN_TAIL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TauMode {
    Fixed {
        tau: u64,
    },
    /// Geometric on `{1, 2, ...}` with the given mean.
    Geometric {
        mean: f64,
    },
}

/// Law of the ratios `delta_i / delta_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RatioDist {
    Uniform { upper: f64 },
    PointMass { value: f64 },
    Exponential { mean: f64 },
}

impl RatioDist {
    pub fn mean(&self) -> f64 {
        match *self {
            RatioDist::Uniform { upper } => upper / 2.0,
            RatioDist::PointMass { value } => value,
            RatioDist::Exponential { mean } => mean,
        }
    }
}

/// How the ratio sum turns into spending. `Linear` is the model as stated;
/// `LogLinear` uses `kappa * exp(sum)`, its small-ratio approximation, which
/// turns a geometric number of goods into a power-law tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Linear,
    LogLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentModelConfig {
    pub n_agents: usize,
    pub kappa: f64,
    pub tau: TauMode,
    pub ratio: RatioDist,
    #[serde(default)]
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for AgentModelConfig {
    fn default() -> Self {
        AgentModelConfig {
            n_agents: 100_000,
            kappa: 100.0,
            tau: TauMode::Geometric { mean: 10.0 },
            ratio: RatioDist::Uniform { upper: 0.1 },
            aggregation: Aggregation::Linear,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl AgentModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1".into());
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        match self.tau {
            TauMode::Fixed { tau } if tau < 2 => return bad(format!("fixed tau must be at least 2, got {tau}")),
            TauMode::Geometric { mean } if !(mean > 1.0 && mean.is_finite()) => {
                return bad(format!("geometric tau mean must exceed 1, got {mean}"))
            }
            _ => {}
        }
        let v = match self.ratio {
            RatioDist::Uniform { upper } => upper,
            RatioDist::PointMass { value } => value,
            RatioDist::Exponential { mean } => mean,
        };
        if !(v > 0.0 && v.is_finite()) {
            return bad(format!("ratio law parameter must be positive, got {v}"));
        }
        Ok(())
    }
}

enum RatioSampler {
    Uniform(f64),
    Point(f64),
    Exp(Exp<f64>),
}

impl RatioSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RatioSampler::Uniform(u) => u * rng.random::<f64>(),
            RatioSampler::Point(v) => *v,
            RatioSampler::Exp(e) => e.sample(rng),
        }
    }
}

/// Spending of `n_agents` independent agents. Agents are simulated in
/// fixed-size chunks, chunk `j` on stream `j` of the seeded generator, so
/// the output is identical for any thread count.
pub fn simulate_consumption(config: &AgentModelConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let ratio = match config.ratio {
        RatioDist::Uniform { upper } => RatioSampler::Uniform(upper),
        RatioDist::PointMass { value } => RatioSampler::Point(value),
        RatioDist::Exponential { mean } => RatioSampler::Exp(Exp::new(1.0 / mean).expect("validated mean")),
    };
    let geometric = match config.tau {
        TauMode::Geometric { mean } => Some(Geometric::new(1.0 / mean).expect("validated mean")),
        TauMode::Fixed { .. } => None,
    };
    let n_chunks = config.n_agents.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(config.seed, j as u64);
            let len = CHUNK.min(config.n_agents - j * CHUNK);
            (0..len)
                .map(|_| {
                    let tau = match (&config.tau, &geometric) {
                        (TauMode::Fixed { tau }, _) => *tau,
                        (_, Some(g)) => 1 + g.sample(&mut rng),
                        _ => unreachable!(),
                    };
                    let sum: f64 = (1..tau).map(|_| ratio.draw(&mut rng)).sum();
                    match config.aggregation {
                        Aggregation::Linear => config.kappa * (1.0 + sum),
                        Aggregation::LogLinear => config.kappa * sum.exp(),
                    }
                })
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// Hill estimate of the upper-tail exponent from the largest
/// `floor(top_fraction * n)` values.
pub fn tail_exponent_hill(values: &[f64], top_fraction: f64) -> Result<f64> {
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "top fraction must lie in (0, 1), got {top_fraction}"
        )));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "Hill estimator needs positive finite values".into(),
        ));
    }
    let k = (top_fraction * values.len() as f64).floor() as usize;
    if k < MIN_TAIL || k >= values.len() {
        return Err(Error::InsufficientTail {
            found: k,
            required: MIN_TAIL,
        });
    }
    let mut sorted = values.to_vec();
    sorted.par_sort_unstable_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k].ln();
    let mean_excess = sorted[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    if !(mean_excess > 0.0) {
        return Err(Error::DegenerateSample("top values are all tied".into()));
    }
    Ok(1.0 / mean_excess)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_is_deterministic_spend() {
        let cfg = AgentModelConfig {
            n_agents: 1000,
            kappa: 50.0,
            tau: TauMode::Fixed { tau: 2 },
            ratio: RatioDist::PointMass { value: 0.3 },
            ..Default::default()
        };
        assert!(simulate_consumption(&cfg).unwrap().iter().all(|&c| c == 50.0 * 1.3));
    }

    #[test]
    fn kappa_is_a_scale() {
        let cfg = AgentModelConfig {
            n_agents: 40_000,
            ..Default::default()
        };
        let a = simulate_consumption(&cfg).unwrap();
        let b = simulate_consumption(&AgentModelConfig { kappa: 200.0, ..cfg }).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (2.0 * x - y).abs() <= 1e-12 * y));
        assert!(a.iter().all(|&c| c >= cfg.kappa));
    }

    #[test]
    fn config_validation() {
        let bad = AgentModelConfig {
            tau: TauMode::Fixed { tau: 1 },
            ..Default::default()
        };
        assert!(matches!(simulate_consumption(&bad), Err(Error::InvalidConfig(_))));
        let bad = AgentModelConfig {
            tau: TauMode::Geometric { mean: 1.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hill_needs_enough_tail() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert!(matches!(
            tail_exponent_hill(&v, 0.05),
            Err(Error::InsufficientTail { found: 50, .. })
        ));
    }
}
