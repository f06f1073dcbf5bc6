//! Single and double layer potentials at points away from the surface.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bem::assembly::{Panel, PanelRule};
use crate::bem::kernel::KernelParams;
use crate::error::{FsiError, Result};
use crate::mesh::SurfaceMesh;
use crate::model::Vec3;
use crate::quadrature::MAX_ORDER;

type C = Complex64;

/// Closest point of triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn distance_to_triangle(mesh: &SurfaceMesh, t: usize, x: &Vec3) -> f64 {
    let [a, b, c] = mesh.corners(t);
    (closest_point_on_triangle(*x, a, b, c) - x).norm()
}

pub fn distance_to_surface(mesh: &SurfaceMesh, x: &Vec3) -> f64 {
    (0..mesh.n_triangles())
        .map(|t| distance_to_triangle(mesh, t, x))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest edge length of the mesh; evaluation points must stay at least
/// this far from the surface.
pub fn near_field_radius(mesh: &SurfaceMesh) -> f64 {
    mesh.triangles()
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
        .map(|(a, b)| (mesh.vertices()[a] - mesh.vertices()[b]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Potential evaluation matrices for a fixed point set and frequency:
/// `Phi = D phi - S lambda`.
#[derive(Clone, Debug)]
pub struct PotentialEvaluator {
    /// Points x P1 coefficients.
    pub double_layer: DMatrix<C>,
    /// Points x P0 coefficients.
    pub single_layer: DMatrix<C>,
}

impl PotentialEvaluator {
    pub fn new(params: &KernelParams, mesh: &SurfaceMesh, points: &[Vec3]) -> Result<Self> {
        let h_min = near_field_radius(mesh);
        let panels: Vec<Panel> = (0..mesh.n_triangles()).map(|t| Panel::new(mesh, t)).collect();
        let mut rules: Vec<Option<Vec<PanelRule>>> = vec![None; MAX_ORDER + 1];
        let mut dl = DMatrix::zeros(points.len(), mesh.n_vertices());
        let mut sl = DMatrix::zeros(points.len(), mesh.n_triangles());
        for (i, x) in points.iter().enumerate() {
            let dist: Vec<f64> = (0..mesh.n_triangles()).map(|t| distance_to_triangle(mesh, t, x)).collect();
            let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
            if dmin < h_min {
                return Err(FsiError::NearField {
                    distance: dmin,
                    minimum: h_min,
                });
            }
            for (t, panel) in panels.iter().enumerate() {
                if params.kappa.re * dist[t] > 46.0 {
                    continue;
                }
                let ratio = dist[t] / panel.diam;
                let base = if ratio > 3.0 {
                    4
                } else if ratio > 1.0 {
                    6
                } else if ratio > 0.5 {
                    9
                } else {
                    12
                };
                let oscillation = (params.kappa.im.abs() * panel.diam / 2.0).ceil() as usize;
                let order = (base + oscillation).min(MAX_ORDER);
                let rule = &rules[order]
                    .get_or_insert_with(|| panels.iter().map(|p| PanelRule::new(p, order)).collect())[t];
                let tri = mesh.triangles()[t];
                let mut s_acc = C::new(0.0, 0.0);
                let mut d_acc = [C::new(0.0, 0.0); 3];
                for (q, y) in rule.points.iter().enumerate() {
                    let d = x - y;
                    let (e, g) = params.green_and_gradient_factor(d.norm());
                    let w = rule.weights[q];
                    s_acc += e * w;
                    let dn = g * (w * panel.normal.dot(&d));
                    for b in 0..3 {
                        d_acc[b] += dn * rule.bary[q][b];
                    }
                }
                sl[(i, t)] = s_acc;
                for b in 0..3 {
                    dl[(i, tri[b])] += d_acc[b];
                }
            }
        }
        Ok(PotentialEvaluator {
            double_layer: dl,
            single_layer: sl,
        })
    }

    pub fn eval(&self, phi: &DVector<C>, lambda: &DVector<C>) -> DVector<C> {
        &self.double_layer * phi - &self.single_layer * lambda
    }
}

/// `Phi(x) = (D phi)(x) - (S lambda)(x)` at each point.
pub fn eval_potentials(
    params: &KernelParams,
    mesh: &SurfaceMesh,
    phi: &DVector<C>,
    lambda: &DVector<C>,
    points: &[Vec3],
) -> Result<DVector<C>> {
    if phi.len() != mesh.n_vertices() || lambda.len() != mesh.n_triangles() {
        return Err(FsiError::MeshMismatch("coefficient vector lengths do not match the mesh".into()));
    }
    Ok(PotentialEvaluator::new(params, mesh, points)?.eval(phi, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::kernel::QuadratureConfig;
    use crate::mesh::sphere_surface;

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        assert_eq!(closest_point_on_triangle(Vec3::new(-1.0, -1.0, 0.0), a, b, c), a);
        let p = closest_point_on_triangle(Vec3::new(0.2, 0.2, 3.0), a, b, c);
        assert!((p - Vec3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        let p = closest_point_on_triangle(Vec3::new(1.0, 1.0, 0.0), a, b, c);
        assert!((p - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        let p = closest_point_on_triangle(Vec3::new(0.5, -2.0, 1.0), a, b, c);
        assert!((p - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_data_gives_zero_and_near_field_is_rejected() {
        let mesh = sphere_surface(1, 1.0);
        let p = KernelParams::with_kappa(C::new(1.0, 1.0), QuadratureConfig::default()).unwrap();
        let phi = DVector::zeros(mesh.n_vertices());
        let lambda = DVector::zeros(mesh.n_triangles());
        let v = eval_potentials(&p, &mesh, &phi, &lambda, &[Vec3::new(3.0, 0.0, 0.0)]).unwrap();
        assert_eq!(v[0], C::new(0.0, 0.0));
        let err = eval_potentials(&p, &mesh, &phi, &lambda, &[Vec3::new(1.01, 0.0, 0.0)]);
        assert!(matches!(err, Err(FsiError::NearField { .. })));
    }

    #[test]
    fn constant_double_layer_is_minus_one_inside() {
        // Laplace limit: D applied to 1 is -1 inside and 0 outside for the
        // outward normal and this sign convention (Gauss' solid angle).
        let mesh = sphere_surface(2, 1.0);
        let p = KernelParams::with_kappa(C::new(0.0, 0.0), QuadratureConfig::default()).unwrap();
        let ev = PotentialEvaluator::new(&p, &mesh, &[Vec3::new(0.1, 0.2, -0.1), Vec3::new(2.0, 1.0, 0.0)]).unwrap();
        let ones = DVector::from_element(mesh.n_vertices(), C::new(1.0, 0.0));
        let d = &ev.double_layer * ones;
        assert!((d[0] + 1.0).norm() < 1e-10, "{}", d[0]);
        assert!(d[1].norm() < 1e-10, "{}", d[1]);
    }
}
