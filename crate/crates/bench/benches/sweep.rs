use criterion::{criterion_group, criterion_main, Criterion};
use fsi_bench::{plane_wave, sphere_operators};
use fsi_core::coupled::solve_sweep;
use fsi_core::cq::{CQGrid, Scheme};
use fsi_core::ComplexFrequency;

fn sweep(c: &mut Criterion) {
    let ops = sphere_operators(1);
    let incident = plane_wave();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let s = ComplexFrequency::from_parts(1.0, 2.0).unwrap();
    group.bench_function("single_frequency_level1", |b| {
        b.iter(|| ops.system(&s).unwrap().solve(&ops.build_rhs(&s, &incident).unwrap()).unwrap())
    });
    let grid = CQGrid::new(8.0, 8, Scheme::Bdf2).unwrap();
    group.bench_function("bdf2_n8_level1", |b| b.iter(|| solve_sweep(&ops, &grid, &incident).unwrap()));
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
