use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qvdp_bench::{bistable, limit_cycle};
use qvdp_core::spectral::{diagonalize, sector_eigenvalues, symmetry_broken_states_sparse};
use qvdp_core::{build_rotating_liouvillian, FockSpace, Parity};

fn build(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    for d in [10, 20, 40] {
        let space = FockSpace::new(d).unwrap();
        let p = limit_cycle(5.0);
        g.bench_with_input(BenchmarkId::from_parameter(d), &space, |b, s| {
            b.iter(|| build_rotating_liouvillian(black_box(&p), s))
        });
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum");
    g.sample_size(10);
    for d in [10, 16, 24] {
        let l = build_rotating_liouvillian(&limit_cycle(3.0), &FockSpace::new(d).unwrap());
        g.bench_with_input(BenchmarkId::new("full", d), &l, |b, l| b.iter(|| diagonalize(l, true).unwrap()));
        g.bench_with_input(BenchmarkId::new("odd_sector", d), &l, |b, l| {
            b.iter(|| sector_eigenvalues(l, Parity::Odd).unwrap())
        });
    }
    g.finish();
}

fn steady(c: &mut Criterion) {
    let mut g = c.benchmark_group("symmetry_broken");
    g.sample_size(10);
    for d in [20, 30] {
        let l = build_rotating_liouvillian(&bistable(4.0), &FockSpace::new(d).unwrap());
        g.bench_with_input(BenchmarkId::from_parameter(d), &l, |b, l| {
            b.iter(|| symmetry_broken_states_sparse(l).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, build, spectrum, steady);
criterion_main!(benches);
