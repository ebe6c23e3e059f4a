use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use expendist::*;
use expendist_bench::fixture;

fn fitting(c: &mut Criterion) {
    let sample = fixture("rural", Unit::Person);
    let mut group = c.benchmark_group("fit_chi2");
    group.sample_size(10);
    for family in [Family::Lognormal, Family::Mixture] {
        group.bench_function(family.name(), |b| {
            b.iter(|| fit_chi2(&sample, family, Unit::Person, &FitOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let sample = fixture("urban", Unit::Household);
    let spec = DistributionSpec::mixture(991.283, 0.268, 1.4, 1732.138, 0.169);
    let mut group = c.benchmark_group("mc_pvalue");
    group.sample_size(10);
    for statistic in [Statistic::Ks, Statistic::Chi2] {
        group.bench_function(format!("{statistic} x1000"), |b| {
            b.iter(|| mc_pvalue(&sample, &spec, Unit::Household, statistic, 1000, DEFAULT_SEED).unwrap())
        });
    }
    group.finish();
}

fn inequality(c: &mut Criterion) {
    let spec = DistributionSpec::mixture(660.502, 0.178, 1.5, 619.08, 0.3538);
    let draws = spec.sample(1_000_000, DEFAULT_SEED).unwrap();
    let mut group = c.benchmark_group("inequality");
    group.sample_size(10);
    group.bench_function("gini_pairwise 1e6", |b| {
        b.iter_batched(|| draws.clone(), |x| gini_pairwise(&x).unwrap(), BatchSize::LargeInput)
    });
    group.bench_function("sample 1e6", |b| {
        b.iter(|| spec.sample(1_000_000, DEFAULT_SEED).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fitting, monte_carlo, inequality);
criterion_main!(benches);
