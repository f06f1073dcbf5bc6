//! Boundary integral operators of the Laplace-domain wave equation and the
//! layer potentials.

pub mod assembly;
pub mod kernel;
pub mod potential;

pub use assembly::{assemble_k, assemble_kp, assemble_v, assemble_w, BioMatrices};
pub use kernel::{KernelParams, QuadratureConfig};
pub use potential::{distance_to_surface, eval_potentials, PotentialEvaluator};
