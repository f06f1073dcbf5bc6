//! Surface and volume meshes, their file format, and the discrete spaces
//! built on them.

pub mod io;
pub mod spaces;
pub mod sphere;
pub mod surface;
pub mod volume;

pub use io::{load_mesh, read_mesh, write_surface, write_volume, LoadedMesh};
pub use spaces::{mass_p0_p1, mass_p1_p1, trace_coupling_matrix, DiscreteSpaces};
pub use sphere::{octahedron, sphere_surface, sphere_volume, unit_cube};
pub use surface::SurfaceMesh;
pub use volume::VolumeMesh;
