//! Time-domain outputs: displacement, boundary traces, scattered potential
//! and pressure at exterior points, elastic energy.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bem::potential::{distance_to_surface, near_field_radius};
use crate::bem::PotentialEvaluator;
use crate::coupled::{CouplingOperators, FrequencySolution, FrequencySweep};
use crate::cq::{inverse, CQGrid, Spectrum};
use crate::error::{FsiError, Result};
use crate::fem::{quadratic_form, FemMatrices};
use crate::mesh::SurfaceMesh;
use crate::model::{ComplexFrequency, IncidentField, TimeSignal, Vec3};

type C = Complex64;

/// Where traces are recorded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    pub exterior_points: Vec<Vec3>,
    /// Surface vertex indices.
    pub surface_probes: Vec<usize>,
    /// Volume vertex indices.
    pub volume_probes: Vec<usize>,
}

impl ObservationSet {
    pub fn validate(&self, ops: &CouplingOperators) -> Result<()> {
        let h_min = near_field_radius(&ops.surface);
        for p in &self.exterior_points {
            let d = distance_to_surface(&ops.surface, p);
            if d < h_min {
                return Err(FsiError::NearField {
                    distance: d,
                    minimum: h_min,
                });
            }
            if winding_number(&ops.surface, p).abs() > 0.5 {
                return Err(FsiError::MeshMismatch(format!("observation point {p:?} lies inside the body")));
            }
        }
        if let Some(&j) = self.surface_probes.iter().find(|&&j| j >= ops.spaces.p1_surface) {
            return Err(FsiError::MeshMismatch(format!("surface probe {j} out of range")));
        }
        let nv = ops.spaces.p1_vector_volume / 3;
        if let Some(&j) = self.volume_probes.iter().find(|&&j| j >= nv) {
            return Err(FsiError::MeshMismatch(format!("volume probe {j} out of range")));
        }
        Ok(())
    }
}

/// Total solid angle of the surface seen from `x`, over `4 pi`: one inside
/// a closed outward oriented surface, zero outside.
pub fn winding_number(mesh: &SurfaceMesh, x: &Vec3) -> f64 {
    let total: f64 = (0..mesh.n_triangles())
        .map(|t| {
            let [a, b, c] = mesh.corners(t).map(|p| p - x);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            2.0 * num.atan2(den)
        })
        .sum();
    total / (4.0 * std::f64::consts::PI)
}

/// Reconstructed causal time series.
#[derive(Clone, Debug)]
pub struct SolutionTrace {
    /// All volume coefficients `u_h(t_n)`.
    pub displacement: TimeSignal,
    /// `du_h/dt`, through the discrete symbol `s`.
    pub velocity: TimeSignal,
    pub phi: TimeSignal,
    pub lambda: TimeSignal,
    /// Scattered potential at the exterior points.
    pub exterior: TimeSignal,
    /// Scattered pressure `rho_0 dPhi/dt` at the exterior points.
    pub pressure: TimeSignal,
    /// Incident pressure `rho_0 dphi_inc/dt` at the exterior points.
    pub incident_pressure: TimeSignal,
    /// Largest imaginary part left by the inverse transforms, relative to
    /// the peak of each block.
    pub imaginary_residue: f64,
}

impl SolutionTrace {
    /// Displacement components at a volume vertex.
    pub fn volume_probe(&self, vertex: usize) -> TimeSignal {
        self.displacement.columns(&[3 * vertex, 3 * vertex + 1, 3 * vertex + 2])
    }

    pub fn surface_phi(&self, vertex: usize) -> TimeSignal {
        self.phi.columns(&[vertex])
    }

    /// Area weighted mean of `lambda` over the triangles around a vertex.
    pub fn surface_lambda(&self, mesh: &SurfaceMesh, vertex: usize) -> TimeSignal {
        let tris: Vec<usize> = (0..mesh.n_triangles()).filter(|&t| mesh.triangles()[t].contains(&vertex)).collect();
        let area: f64 = tris.iter().map(|&t| mesh.areas()[t]).sum();
        TimeSignal::from_fn(self.lambda.dt(), self.lambda.n_steps(), 1, |t, out| {
            let n = (t / self.lambda.dt()).round() as usize;
            out[0] = tris.iter().map(|&k| mesh.areas()[k] * self.lambda.row(n)[k]).sum::<f64>() / area;
        })
    }

    /// `(u, phi, lambda)` stacked at every step.
    pub fn coefficient_norms(&self) -> Vec<f64> {
        (0..=self.phi.n_steps())
            .map(|n| {
                [&self.displacement, &self.phi, &self.lambda]
                    .iter()
                    .flat_map(|s| s.row(n))
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Per-frequency post-processing map applied before the inverse transform.
fn post_map(
    ops: &CouplingOperators,
    sol: &FrequencySolution,
    points: &[Vec3],
    rho_0: f64,
) -> Result<[Vec<C>; 6]> {
    let s = sol.frequency.s();
    let exterior = if points.is_empty() {
        Vec::new()
    } else {
        let ev = PotentialEvaluator::new(&ops.kernel(&sol.frequency)?, &ops.surface, points)?;
        ev.eval(&sol.phi_hat, &sol.lambda_hat).iter().copied().collect()
    };
    let pressure = exterior.iter().map(|v| v * s * rho_0).collect();
    Ok([
        sol.u_hat.iter().copied().collect(),
        sol.u_hat.iter().map(|v| v * s).collect(),
        sol.phi_hat.iter().copied().collect(),
        sol.lambda_hat.iter().copied().collect(),
        exterior,
        pressure,
    ])
}

/// Inverse transforms the frequency solutions into time traces.
pub fn reconstruct(
    sweep: &FrequencySweep,
    grid: &CQGrid,
    obs: &ObservationSet,
    ops: &CouplingOperators,
    incident: &IncidentField,
) -> Result<SolutionTrace> {
    obs.validate(ops)?;
    if sweep.solutions.len() != grid.n_steps() / 2 + 1 {
        return Err(FsiError::Grid("frequency set does not match the grid".into()));
    }
    for (l, sol) in sweep.solutions.iter().enumerate() {
        let expected = grid.frequency(l)?;
        if (sol.frequency.s() - expected.s()).norm() > 1e-12 * expected.modulus() {
            return Err(FsiError::Grid(format!("solution {l} was computed at a different frequency")));
        }
    }
    let rho_0 = ops.fem.rho_0;
    let points = &obs.exterior_points;
    let mapped = sweep
        .solutions
        .par_iter()
        .map(|sol| post_map(ops, sol, points, rho_0))
        .collect::<Result<Vec<_>>>()?;
    let start = match &sweep.start {
        Some(sol) => Some(post_map(ops, sol, points, rho_0)?),
        None => None,
    };
    let mut blocks = Vec::with_capacity(6);
    let mut residue = 0.0f64;
    for b in 0..6 {
        let spectrum = Spectrum {
            values: mapped.iter().map(|m| m[b].clone()).collect(),
            start: start.as_ref().map(|m| m[b].clone()),
        };
        if spectrum.width() == 0 {
            blocks.push(TimeSignal::zeros(grid.dt(), grid.n_steps(), 0));
            continue;
        }
        let out = inverse(grid, &spectrum)?;
        residue = residue.max(out.imaginary_residue);
        blocks.push(out.signal);
    }
    let mut incident_pressure = TimeSignal::zeros(grid.dt(), grid.n_steps(), points.len());
    for n in 0..=grid.n_steps() {
        let t = incident_pressure.time(n);
        for (k, p) in points.iter().enumerate() {
            incident_pressure.row_mut(n)[k] = rho_0 * incident.eval_rate(p, t)?;
        }
    }
    let mut it = blocks.into_iter();
    let mut next = || it.next().expect("six blocks");
    Ok(SolutionTrace {
        displacement: next(),
        velocity: next(),
        phi: next(),
        lambda: next(),
        exterior: next(),
        pressure: next(),
        incident_pressure,
        imaginary_residue: residue,
    })
}

/// Elastic energy `(rho_e v^T M v + u^T K u) / 2` at every step.
pub fn energy_report(trace: &SolutionTrace, fem: &FemMatrices) -> Vec<f64> {
    (0..=trace.displacement.n_steps())
        .map(|n| {
            let u: Vec<C> = trace.displacement.row(n).iter().map(|v| C::new(*v, 0.0)).collect();
            let v: Vec<C> = trace.velocity.row(n).iter().map(|v| C::new(*v, 0.0)).collect();
            0.5 * (fem.rho_e * quadratic_form(&fem.mass, &v) + quadratic_form(&fem.stiffness, &u))
        })
        .collect()
}

/// Lower bound for the time at which scattered waves can reach `x`: the
/// incident field must first reach the surface and then travel to `x`.
pub fn earliest_scattered_arrival(incident: &IncidentField, surface: &SurfaceMesh, x: &Vec3) -> f64 {
    let c = incident.sound_speed;
    let samples = surface
        .vertices()
        .iter()
        .copied()
        .chain((0..surface.n_triangles()).map(|t| surface.centroid(t)));
    let best = samples
        .map(|y| incident.arrival_time(&y) + (x - y).norm() / c)
        .fold(f64::INFINITY, f64::min);
    // Sampling only vertices and centroids can miss the minimum by at
    // most one edge length in each leg.
    best - 2.0 * surface.mesh_size() / c
}

/// Exterior representation `D phi - S lambda` evaluated at points inside
/// the body, where it should vanish.
pub fn interior_field(ops: &CouplingOperators, sol: &FrequencySolution, points: &[Vec3]) -> Result<DVector<C>> {
    let ev = PotentialEvaluator::new(&ops.kernel(&sol.frequency)?, &ops.surface, points)?;
    Ok(ev.eval(&sol.phi_hat, &sol.lambda_hat))
}

/// Exterior representation at points outside the body.
pub fn exterior_field(ops: &CouplingOperators, sol: &FrequencySolution, points: &[Vec3]) -> Result<DVector<C>> {
    interior_field(ops, sol, points)
}

/// Frequency of a solution, for convenience in reports.
pub fn frequency_of(sol: &FrequencySolution) -> ComplexFrequency {
    sol.frequency
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::QuadratureConfig;
    use crate::coupled::solve_sweep;
    use crate::cq::Scheme;
    use crate::mesh::sphere_volume;
    use crate::model::{MaterialSystem, Pulse};

    fn run(amplitude: f64) -> (CouplingOperators, SolutionTrace, IncidentField) {
        let (s, v) = sphere_volume(1, 1.0).unwrap();
        let mat = MaterialSystem::steel_in_water(8.0);
        let ops = CouplingOperators::new(&s, &v, &mat, QuadratureConfig::default()).unwrap();
        let grid = CQGrid::new(8.0, 64, Scheme::Bdf2).unwrap();
        let pulse = Pulse::gaussian_sine(3.0, 0.3, 2.0).with_amplitude(amplitude);
        let inc = IncidentField::plane_wave(Vec3::new(1.0, 0.0, 0.0), pulse, 1.0).unwrap();
        let sweep = solve_sweep(&ops, &grid, &inc).unwrap();
        let obs = ObservationSet {
            exterior_points: vec![Vec3::new(-3.0, 0.0, 0.0)],
            surface_probes: vec![0],
            volume_probes: vec![0],
        };
        let trace = reconstruct(&sweep, &grid, &obs, &ops, &inc).unwrap();
        (ops, trace, inc)
    }

    #[test]
    fn silent_field_gives_zero_traces_and_energy() {
        let (ops, trace, _) = run(0.0);
        assert_eq!(trace.displacement.max_abs(), 0.0);
        assert_eq!(trace.exterior.max_abs(), 0.0);
        assert!(energy_report(&trace, &ops.fem).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn traces_are_real_linear_and_energy_nonnegative() {
        let (ops, one, _) = run(1.0);
        let (_, two, _) = run(2.0);
        assert!(one.imaginary_residue < 1e-8, "{}", one.imaginary_residue);
        assert!(one.exterior.max_abs() > 0.0);
        for (a, b) in [(&one.displacement, &two.displacement), (&one.exterior, &two.exterior), (&one.lambda, &two.lambda)] {
            let scale = a.max_abs();
            assert!(a.scaled(2.0).axpy(-1.0, b).max_abs() <= 1e-12 * scale);
        }
        let energy = energy_report(&one, &ops.fem);
        assert!(energy.iter().all(|&e| e >= 0.0));
        assert!(energy.iter().cloned().fold(0.0, f64::max) > 0.0);
    }

    #[test]
    fn probes_and_validation() {
        let (ops, trace, inc) = run(1.0);
        assert_eq!(trace.volume_probe(0).width(), 3);
        assert_eq!(trace.surface_phi(0).width(), 1);
        assert_eq!(trace.surface_lambda(&ops.surface, 0).n_steps(), 64);
        let bad = ObservationSet {
            exterior_points: vec![Vec3::new(1.001, 0.0, 0.0)],
            ..Default::default()
        };
        assert!(matches!(bad.validate(&ops), Err(FsiError::NearField { .. })));
        let inside = ObservationSet {
            exterior_points: vec![Vec3::zeros()],
            ..Default::default()
        };
        assert!(inside.validate(&ops).is_err());
        let x = Vec3::new(-3.0, 0.0, 0.0);
        // Plane wave along +x hits x = -1 first, then travels 2 back.
        let t = earliest_scattered_arrival(&inc, &ops.surface, &x);
        let exact = inc.pulse.onset() - 1.0 + 2.0;
        assert!(t <= exact && t > exact - 2.0 * ops.surface.mesh_size() - 1e-12);
    }
}
