use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hibscreen::hib::log_kernel_integral;
use hibscreen::posterior::{marginal_m1, posterior_mean_beta};
use hibscreen::quadrature::KappaGrid;
use hibscreen::screening::{synthetic_cohort, CohortSpec};
use hibscreen::simulation::{generate_dataset, run_hib_estimator, ExperimentConfig, SignalSpec};
use hibscreen::specfun::phi1;
use hibscreen::twogroups::{fit_hyperparams, FitConfig};
use hibscreen::{HIBParams, SeriesControl};

fn special_functions(c: &mut Criterion) {
    let ctrl = SeriesControl::default();
    let mut g = c.benchmark_group("phi1");
    for &(x, y) in &[(3.0, 0.5), (-20.0, 0.9), (20.0, -0.9)] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("x={x},y={y}")),
            &(x, y),
            |b, &(x, y)| b.iter(|| phi1(black_box(0.5), 1.0, 1.5, x, y, ctrl)),
        );
    }
    g.finish();

    // the series cost grows away from τ = 1; the grid's does not
    let mut g = c.benchmark_group("kernel_integral");
    let grid = KappaGrid::new(0.5, 1.0);
    for &tau in &[0.1, 1.0, 10.0] {
        g.bench_with_input(BenchmarkId::new("series", tau), &tau, |b, &t| {
            b.iter(|| log_kernel_integral(0.5, 1.0, black_box(t), 0.0))
        });
        let weights = grid.with_tau(tau);
        g.bench_with_input(BenchmarkId::new("grid", tau), &weights, |b, w| {
            b.iter(|| grid.log_integral(black_box(w), 0.0))
        });
    }
    g.finish();
}

fn posterior(c: &mut Criterion) {
    let p = HIBParams::strawderman();
    c.bench_function("posterior_mean_beta y=3", |b| {
        b.iter(|| posterior_mean_beta(black_box(3.0), &p))
    });
    c.bench_function("marginal_m1 y=3", |b| b.iter(|| marginal_m1(black_box(3.0), &p)));
}

fn fitting(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    let cfg = ExperimentConfig {
        signal: SignalSpec::Fixed { k: 50, value: 5.0 },
        ..ExperimentConfig::default()
    };
    let data = generate_dataset(&cfg, 0).expect("valid config");
    let fit = FitConfig {
        seed: 1,
        ..FitConfig::default()
    };
    g.bench_function("fit_hyperparams p=1000", |b| {
        b.iter(|| fit_hyperparams(black_box(&data.y), &fit))
    });
    g.bench_function("hib estimator p=1000", |b| {
        b.iter(|| run_hib_estimator(black_box(&data.y), 0.5, 1.0, &fit))
    });
    g.bench_function("synthetic cohort 1030 firms", |b| {
        b.iter(|| synthetic_cohort(black_box(&CohortSpec::default())))
    });
    g.finish();
}

criterion_group!(benches, special_functions, posterior, fitting);
criterion_main!(benches);
