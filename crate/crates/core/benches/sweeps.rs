use criterion::{criterion_group, criterion_main, Criterion};
use qd_exciton::config::{ExperimentConfig, ExperimentName};
use qd_exciton::experiments::run_experiment;
use qd_exciton::parallel::Execution;

fn field_sweep(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::defaults(ExperimentName::Sweep);
    cfg.sweep.points = 16;
    let mut group = c.benchmark_group("field_sweep_16");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_experiment(&cfg, Execution::Sequential).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_experiment(&cfg, Execution::Parallel).unwrap())
    });
    group.finish();
}

fn amplitude_sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig::defaults(ExperimentName::Fig3b);
    let mut group = c.benchmark_group("phase_vs_amplitude");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_experiment(&cfg, Execution::Sequential).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_experiment(&cfg, Execution::Parallel).unwrap())
    });
    group.finish();
}

criterion_group!(benches, field_sweep, amplitude_sweep);
criterion_main!(benches);
