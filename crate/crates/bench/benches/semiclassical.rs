use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qvdp_bench::scaled;
use qvdp_core::semiclassical::{
    build_phase_fp, converged_phase_spectrum, kramers_rates, perturbative_cn, phase_spectrum, PhaseSector,
};

fn phase_operator(c: &mut Criterion) {
    let mut g = c.benchmark_group("phase_fp");
    let p = scaled(0.6, 1e3);
    for m in [32, 64, 128] {
        g.bench_with_input(BenchmarkId::new("eigenvalues", m), &m, |b, &m| {
            b.iter(|| phase_spectrum(&build_phase_fp(PhaseSector::OddB, m, &p).unwrap()).unwrap())
        });
    }
    g.bench_function("converged_locked", |b| {
        let p = scaled(2.0, 20.0);
        b.iter(|| converged_phase_spectrum(PhaseSector::OddB, 32, black_box(&p)).unwrap())
    });
    g.bench_function("perturbative_cn", |b| b.iter(|| perturbative_cn(black_box(&p), 64, 4).unwrap()));
    g.finish();
}

fn kramers(c: &mut Criterion) {
    let p = scaled(2.5, 15.0);
    c.bench_function("kramers_rates", |b| b.iter(|| kramers_rates(black_box(&p)).unwrap()));
}

criterion_group!(benches, phase_operator, kramers);
criterion_main!(benches);
