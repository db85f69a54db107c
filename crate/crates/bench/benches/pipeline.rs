use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hdts_bench::{linear_panel, psd_matrix};
use hdts_core::experiments::ks_statistic;
use hdts_core::gboot::{bootstrap_quantile, psd_sqrt};
use hdts_core::longrun::{sigma_tilde, BlockPlan};
use hdts_core::model::simulate;
use hdts_core::{ProcessSpec, RngContract};
use std::hint::black_box;

fn bench_simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for p in [10, 100] {
        let spec = ProcessSpec::linear(p, 1.0, 200, 2, 0.5);
        g.bench_with_input(BenchmarkId::new("linear_n1000", p), &spec, |b, spec| {
            b.iter(|| simulate(black_box(spec), 1000, RngContract::new(3)).unwrap())
        });
    }
    g.finish();
}

fn bench_sigma_tilde(c: &mut Criterion) {
    let mut g = c.benchmark_group("sigma_tilde");
    for p in [10, 100] {
        let panel = linear_panel(2000, p);
        let plan = BlockPlan::default_for(2000).unwrap();
        g.bench_with_input(BenchmarkId::new("n2000", p), &panel, |b, panel| {
            b.iter(|| sigma_tilde(black_box(panel), &plan).unwrap())
        });
    }
    g.finish();
}

fn bench_psd_sqrt(c: &mut Criterion) {
    let mut g = c.benchmark_group("psd_sqrt");
    for p in [20, 100, 200] {
        let a = psd_matrix(p);
        g.bench_with_input(BenchmarkId::from_parameter(p), &a, |b, a| b.iter(|| psd_sqrt(black_box(a)).unwrap()));
    }
    g.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let panel = linear_panel(1000, 50);
    let est = sigma_tilde(&panel, &BlockPlan::default_for(1000).unwrap()).unwrap();
    c.bench_function("bootstrap_quantile_p50_B2000", |b| {
        b.iter(|| bootstrap_quantile(black_box(&est), 0.95, 2000, RngContract::new(5)).unwrap())
    });
}

fn bench_ks(c: &mut Criterion) {
    let a: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 5003) as f64).collect();
    let b: Vec<f64> = (0..5000).map(|i| ((i * 104_729) % 4999) as f64 + 0.5).collect();
    c.bench_function("ks_5000x5000", |bch| bch.iter(|| ks_statistic(black_box(&a), black_box(&b))));
}

criterion_group!(benches, bench_simulate, bench_sigma_tilde, bench_psd_sqrt, bench_bootstrap, bench_ks);
criterion_main!(benches);
