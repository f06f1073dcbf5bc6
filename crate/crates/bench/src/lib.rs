//! Fixtures shared by the benchmarks.

use fsi_core::bem::QuadratureConfig;
use fsi_core::coupled::CouplingOperators;
use fsi_core::mesh::sphere_volume;
use fsi_core::{IncidentField, MaterialSystem, Pulse, Vec3};

pub fn sphere_operators(level: usize) -> CouplingOperators {
    let (surface, volume) = sphere_volume(level, 1.0).expect("sphere mesh");
    CouplingOperators::new(&surface, &volume, &MaterialSystem::steel_in_water(8.0), QuadratureConfig::default())
        .expect("operators")
}

pub fn plane_wave() -> IncidentField {
    IncidentField::plane_wave(Vec3::x(), Pulse::gaussian_sine(4.0, 0.3, 2.0), 1.0).expect("incident")
}
