use criterion::{criterion_group, criterion_main, Criterion};

use bugcast_core::diagnostics;
use bugcast_core::synth;

fn bench_adf(c: &mut Criterion) {
    let xs = synth::ar_process(&[0.5, 0.3], 522, 1.0, 11);
    c.bench_function("adf_522", |b| {
        b.iter(|| diagnostics::adf_test_values(std::hint::black_box(&xs), 18).unwrap())
    });
}

fn bench_pacf(c: &mut Criterion) {
    let xs = synth::ar_process(&[0.5, 0.3], 522, 1.0, 11);
    c.bench_function("pacf_522_lag20", |b| {
        b.iter(|| diagnostics::pacf_values(std::hint::black_box(&xs), 20).unwrap())
    });
}

criterion_group!(benches, bench_adf, bench_pacf);
criterion_main!(benches);
