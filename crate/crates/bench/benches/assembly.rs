use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fsi_core::bem::{assemble_v, BioMatrices, KernelParams, QuadratureConfig};
use fsi_core::mesh::sphere_surface;
use num_complex::Complex64;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    let params = KernelParams::with_kappa(Complex64::new(1.0, 2.0), QuadratureConfig::default()).unwrap();
    for level in [1, 2] {
        let mesh = sphere_surface(level, 1.0);
        group.bench_with_input(BenchmarkId::new("single_layer", level), &mesh, |b, m| b.iter(|| assemble_v(&params, m)));
        group.bench_with_input(BenchmarkId::new("all_four", level), &mesh, |b, m| {
            b.iter(|| BioMatrices::assemble(&params, m))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly);
criterion_main!(benches);
