use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qvdp_bench::scaled;
use qvdp_core::langevin::{max_dt, simulate_amplitude, simulate_intensity, simulate_phase, LangevinConfig};
use qvdp_core::c64;

fn ensembles(c: &mut Criterion) {
    let mut g = c.benchmark_group("langevin");
    g.sample_size(10);
    let p = scaled(0.4, 10.0);
    let dt = max_dt(&p);
    for n_traj in [16, 64] {
        let cfg = LangevinConfig::new(dt, 10_000, n_traj, 7).with_save_every(100);
        g.throughput(Throughput::Elements((n_traj * cfg.n_steps) as u64));
        g.bench_with_input(BenchmarkId::new("phase", n_traj), &cfg, |b, cfg| {
            b.iter(|| simulate_phase(&p, cfg, 0.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("intensity", n_traj), &cfg, |b, cfg| {
            b.iter(|| simulate_intensity(&p, cfg, 0.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("amplitude", n_traj), &cfg, |b, cfg| {
            b.iter(|| simulate_amplitude(&p, cfg, c64::new(p.n_ex.sqrt(), 0.0)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ensembles);
criterion_main!(benches);
