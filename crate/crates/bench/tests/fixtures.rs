use fsi_bench::{plane_wave, sphere_operators};

#[test]
fn level_one_fixture_has_expected_sizes() {
    let ops = sphere_operators(1);
    assert_eq!(ops.surface.n_triangles(), 32);
    assert_eq!(ops.spaces.total(), ops.fem.dim() + ops.surface.n_vertices() + ops.surface.n_triangles());
    assert!(plane_wave().pulse.onset() > 0.0);
}
