//! Time-domain acoustic scattering by an elastic body: finite elements in
//! the solid, boundary integral operators for the fluid, a coupled solve
//! per complex frequency and convolution quadrature back to time.

pub mod bem;
pub mod coupled;
pub mod cq;
pub mod error;
pub mod field;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod pipeline;
pub mod quadrature;
pub mod verify;

pub use error::{FsiError, Result};
pub use mesh::{DiscreteSpaces, SurfaceMesh, VolumeMesh};
pub use model::{ComplexFrequency, IncidentField, IncidentKind, MaterialSystem, Pulse, TimeSignal, Vec3};
