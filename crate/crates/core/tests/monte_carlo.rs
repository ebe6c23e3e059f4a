//! Statistical checks of the samplers, the Monte-Carlo p-value and the
//! agent simulation. Seeds are fixed, so every run draws the same numbers.

use expendist::*;

fn urban_like() -> DistributionSpec {
    DistributionSpec::mixture(660.5, 0.178, 3.0, 1000.3, 0.35)
}

#[test]
fn share_above_cutoff_matches_tail_mass() {
    let spec = urban_like();
    let n = 200_000;
    let draws = spec.sample(n, 7).unwrap();
    let share = draws.iter().filter(|&&x| x > 1000.3).count() as f64 / n as f64;
    let p = spec.sf(1000.3).unwrap();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((share - p).abs() < 4.0 * se, "share {share} vs {p}");
}

#[test]
fn empirical_cdf_within_dkw_band() {
    let families = [
        urban_like(),
        DistributionSpec::double_pareto(0.91, 0.84, 900.0),
        DistributionSpec::Gamma {
            shape: 0.7,
            scale: 300.0,
        },
        DistributionSpec::Weibull { k: 2.1, lambda: 1660.0 },
        DistributionSpec::Pareto { nu: 1.2, x0: 50.0 },
    ];
    for spec in families {
        let mut x = spec.sample(100_000, 11).unwrap();
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        let d = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = spec.cdf(v).unwrap();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.01, "{spec:?}: KS {d}");
    }
}

#[test]
fn sample_mean_obeys_clt() {
    let (x_m, s2, nu, x0, pi) = (660.5, 0.178, 3.0, 1000.3, 0.35);
    let spec = DistributionSpec::mixture(x_m, s2, nu, x0, pi);
    let second = pi * nu * x0 * x0 / (nu - 2.0) + (1.0 - pi) * x_m * x_m * (2.0 * s2).exp();
    let mean = spec.mean().unwrap();
    let n = 1_000_000;
    let se = ((second - mean * mean) / n as f64).sqrt();
    let draws = spec.sample(n, 3).unwrap();
    let avg = draws.iter().sum::<f64>() / n as f64;
    assert!((avg - mean).abs() < 4.0 * se, "mean {avg} vs {mean} (se {se})");
}

fn classes_for(spec: &DistributionSpec, limits: &[f64], seed: u64) -> GroupedSample {
    let draws = spec.sample(1000, seed).unwrap();
    let mut counts = vec![0.0; limits.len() + 1];
    for x in draws {
        counts[limits.partition_point(|&z| z < x)] += 1.0;
    }
    let mut lower = 0.0;
    let classes = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let upper = limits.get(i).copied().unwrap_or(f64::INFINITY);
            let class = ExpenditureClass::new(lower, upper, None, c, c);
            lower = upper;
            class
        })
        .collect();
    GroupedSample::new(classes, Unit::Household).unwrap()
}

#[test]
fn pvalues_are_roughly_uniform_under_the_null() {
    let spec = urban_like();
    let limits = [300.0, 400.0, 500.0, 600.0, 700.0, 850.0, 1000.0, 1300.0, 1800.0, 2500.0];
    let trials = 200;
    let mut small = 0;
    for t in 0..trials {
        let sample = classes_for(&spec, &limits, 1_000 + t);
        let rep = mc_pvalue(&sample, &spec, Unit::Household, Statistic::Ks, 200, 50_000 + t).unwrap();
        if rep.p_value < 0.1 {
            small += 1;
        }
    }
    let share = small as f64 / trials as f64;
    assert!((0.04..=0.18).contains(&share), "share of p < 0.1: {share}");
}

#[test]
fn pvalue_is_monotone_in_the_observed_statistic() {
    // with the model and seed fixed, every sample faces the same replicate
    // statistics, so a larger distance can never earn a larger p-value
    let spec = urban_like();
    let limits = [300.0, 400.0, 500.0, 600.0, 700.0, 850.0, 1000.0, 1300.0, 1800.0, 2500.0];
    let shifted = DistributionSpec::mixture(720.0, 0.178, 3.0, 1000.3, 0.35);
    let mut reports: Vec<GofReport> = (0..12)
        .map(|i| {
            let source = if i % 2 == 0 { &spec } else { &shifted };
            let sample = classes_for(source, &limits, 300 + i);
            mc_pvalue(&sample, &spec, Unit::Household, Statistic::Ks, 300, 9).unwrap()
        })
        .collect();
    reports.sort_by(|a, b| a.observed_value.total_cmp(&b.observed_value));
    for w in reports.windows(2) {
        assert!(
            w[1].p_value <= w[0].p_value,
            "{} then {}",
            w[0].summary_line(),
            w[1].summary_line()
        );
    }
    assert!(reports.last().unwrap().p_value < 0.01);
}

#[test]
fn pvalue_is_reproducible() {
    let spec = urban_like();
    let sample = classes_for(&spec, &[400.0, 700.0, 1000.0, 2000.0], 1);
    let a = mc_pvalue(&sample, &spec, Unit::Household, Statistic::Chi2, 100, 77).unwrap();
    let b = mc_pvalue(&sample, &spec, Unit::Household, Statistic::Chi2, 100, 77).unwrap();
    assert_eq!(a, b);
}

// ---------- agent simulation ----------

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
    x.iter().map(|a| (a - m).powi(3)).sum::<f64>() / n / v.powf(1.5)
}

#[test]
fn log_consumption_is_close_to_normal() {
    let cfg = AgentModelConfig {
        n_agents: 100_000,
        tau: TauMode::Fixed { tau: 400 },
        ratio: RatioDist::Uniform { upper: 0.01 },
        ..Default::default()
    };
    let logs: Vec<f64> = simulate_consumption(&cfg).unwrap().iter().map(|c| c.ln()).collect();
    let skew = skewness(&logs);
    assert!(skew.abs() < 0.1, "skew {skew}");

    let n = logs.len() as f64;
    let m = logs.iter().sum::<f64>() / n;
    let sd = (logs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
    let mut z: Vec<f64> = logs.iter().map(|a| (a - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = numeric::normal_cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 0.02, "KS to the normal {d}");
}

#[test]
fn fixed_tau_mean_matches_theory() {
    let cfg = AgentModelConfig {
        n_agents: 100_000,
        kappa: 100.0,
        tau: TauMode::Fixed { tau: 20 },
        ratio: RatioDist::Exponential { mean: 0.3 },
        ..Default::default()
    };
    let c = simulate_consumption(&cfg).unwrap();
    assert!(c.iter().all(|&v| v >= 100.0));
    let n = c.len() as f64;
    let avg = c.iter().sum::<f64>() / n;
    // c = kappa (1 + sum of 19 exponential ratios)
    let expect = 100.0 * (1.0 + 19.0 * 0.3);
    let se = 100.0 * (19.0f64).sqrt() * 0.3 / n.sqrt();
    assert!((avg - expect).abs() < 4.0 * se, "mean {avg} vs {expect}");
}

#[test]
fn hill_recovers_pareto_exponent() {
    let x = DistributionSpec::Pareto { nu: 2.0, x0: 1.0 }
        .sample(100_000, 21)
        .unwrap();
    let est = tail_exponent_hill(&x, 0.05).unwrap();
    assert!((est - 2.0).abs() < 0.15, "Hill {est}");
}

#[test]
fn hill_drifts_upward_on_thin_tails() {
    let x = DistributionSpec::Exponential { rate: 1.0 }.sample(100_000, 22).unwrap();
    let estimates: Vec<f64> = [0.2, 0.1, 0.05, 0.01]
        .iter()
        .map(|&f| tail_exponent_hill(&x, f).unwrap())
        .collect();
    assert!(estimates.windows(2).all(|w| w[1] > w[0]), "{estimates:?}");
    assert!(estimates[3] > 1.5 * estimates[0]);
}

#[test]
fn geometric_tau_gives_a_stable_power_tail() {
    let cfg = AgentModelConfig {
        aggregation: Aggregation::LogLinear,
        ..Default::default()
    };
    let c = simulate_consumption(&cfg).unwrap();
    let estimates: Vec<f64> = [0.05, 0.02, 0.01]
        .iter()
        .map(|&f| tail_exponent_hill(&c, f).unwrap())
        .collect();
    let lo = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().copied().fold(0.0, f64::max);
    assert!(lo.is_finite() && lo > 0.0);
    assert!(hi / lo < 1.15, "{estimates:?}");
}

#[test]
fn simulation_is_reproducible_and_linear_in_kappa() {
    let base = AgentModelConfig {
        n_agents: 40_000,
        ..Default::default()
    };
    let a = simulate_consumption(&base).unwrap();
    assert_eq!(a, simulate_consumption(&base).unwrap());
    let doubled = simulate_consumption(&AgentModelConfig { kappa: 200.0, ..base }).unwrap();
    assert!(a.iter().zip(&doubled).all(|(x, y)| (2.0 * x - y).abs() <= 1e-9 * y));
}
