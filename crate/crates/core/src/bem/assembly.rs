//! Galerkin assembly of the single layer `V`, double layer `K`, adjoint
//! double layer `K'` and hypersingular `W` operators of the kernel
//! `e^{-kappa r} / (4 pi r)`.
//!
//! Spaces: P0 on triangles for `V` (test and trial) and the test side of `K`;
//! continuous P1 on vertices for the trial side of `K`, the test side of
//! `K'` and both sides of `W`. `W` uses the integration by parts formula
//! `<W u, v> = int int E [curl u(y) . curl v(x) + kappa^2 n_x . n_y u(y) v(x)]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bem::kernel::KernelParams;
use crate::mesh::SurfaceMesh;
use crate::model::Vec3;
use crate::quadrature::{self, bary, Contact, MAX_ORDER};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Contributions below `e^{-46}` relative to the near field are dropped.
const DECAY_CUTOFF: f64 = 46.0;
/// Rows assembled per parallel batch.
const ROW_BATCH: usize = 64;

#[derive(Clone, Debug)]
pub(crate) struct Panel {
    pub corners: [Vec3; 3],
    pub normal: Vec3,
    pub area: f64,
    pub centroid: Vec3,
    /// Largest distance from the centroid to a corner.
    pub radius: f64,
    pub diam: f64,
    /// Surface curls of the three barycentric hat functions.
    pub curls: [Vec3; 3],
}

impl Panel {
    pub fn new(mesh: &SurfaceMesh, t: usize) -> Self {
        let corners = mesh.corners(t);
        let area = mesh.areas()[t];
        let centroid = (corners[0] + corners[1] + corners[2]) / 3.0;
        let radius = corners.iter().map(|c| (c - centroid).norm()).fold(0.0, f64::max);
        let diam = (0..3)
            .map(|k| (corners[k] - corners[(k + 1) % 3]).norm())
            .fold(0.0, f64::max);
        let curls = [0, 1, 2].map(|k| (corners[(k + 1) % 3] - corners[(k + 2) % 3]) / (2.0 * area));
        Panel {
            corners,
            normal: mesh.normals()[t],
            area,
            centroid,
            radius,
            diam,
            curls,
        }
    }

    #[inline]
    pub fn map(&self, x: [f64; 2]) -> Vec3 {
        self.corners[0] + x[0] * (self.corners[1] - self.corners[0]) + x[1] * (self.corners[2] - self.corners[1])
    }

    /// Lower bound for the distance between two panels.
    pub fn gap(&self, other: &Panel) -> f64 {
        ((self.centroid - other.centroid).norm() - self.radius - other.radius).max(0.0)
    }
}

/// Quadrature points of one panel: position, weight (including the
/// Jacobian) and barycentric coordinates.
#[derive(Clone, Debug, Default)]
pub(crate) struct PanelRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub bary: Vec<[f64; 3]>,
}

impl PanelRule {
    pub fn new(panel: &Panel, order: usize) -> Self {
        let rule = quadrature::triangle(order);
        PanelRule {
            points: rule.iter().map(|p| panel.map(p.x)).collect(),
            weights: rule.iter().map(|p| p.w * 2.0 * panel.area).collect(),
            bary: rule.iter().map(|p| p.bary()).collect(),
        }
    }
}

/// Pair integrals of test panel `x` against trial panel `y`:
/// `i[a][b] = int int E l_a(x) l_b(y)`,
/// `j[b] = int int dE/dn_y l_b(y)` and `jp[a] = int int dE/dn_x l_a(x)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairIntegrals {
    pub i: [[C; 3]; 3],
    pub j: [C; 3],
    pub jp: [C; 3],
}

impl PairIntegrals {
    const ZERO: PairIntegrals = PairIntegrals {
        i: [[ZERO; 3]; 3],
        j: [ZERO; 3],
        jp: [ZERO; 3],
    };

    /// Integrals of the swapped pair.
    fn transposed(&self) -> Self {
        let mut i = [[ZERO; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                i[a][b] = self.i[b][a];
            }
        }
        PairIntegrals {
            i,
            j: self.jp,
            jp: self.j,
        }
    }

    pub fn total(&self) -> C {
        self.i.iter().flatten().sum()
    }
}

/// Precomputed panels and per-order panel rules.
pub(crate) struct Geometry<'a> {
    pub mesh: &'a SurfaceMesh,
    pub panels: Vec<Panel>,
    rules: Vec<Vec<PanelRule>>,
    vertex_triangles: Vec<Vec<usize>>,
}

impl<'a> Geometry<'a> {
    pub fn new(mesh: &'a SurfaceMesh, max_order: usize) -> Self {
        let panels: Vec<Panel> = (0..mesh.n_triangles()).map(|t| Panel::new(mesh, t)).collect();
        let rules = (0..=max_order)
            .map(|n| {
                if n == 0 {
                    Vec::new()
                } else {
                    panels.iter().map(|p| PanelRule::new(p, n)).collect()
                }
            })
            .collect();
        Geometry {
            mesh,
            panels,
            rules,
            vertex_triangles: mesh.vertex_triangles(),
        }
    }

    fn rule(&self, t: usize, order: usize) -> &PanelRule {
        &self.rules[order.min(self.rules.len() - 1)][t]
    }

    /// Touching panels of `t` with the contact type and local vertex
    /// permutations that put the shared vertices first, in matching order.
    pub fn contacts(&self, t: usize) -> Vec<(usize, Contact, [usize; 3], [usize; 3])> {
        let tri = self.mesh.triangles()[t];
        let mut neighbours: Vec<usize> = tri.iter().flat_map(|&v| self.vertex_triangles[v].iter().copied()).collect();
        neighbours.sort_unstable();
        neighbours.dedup();
        neighbours
            .into_iter()
            .map(|u| {
                if u == t {
                    return (u, Contact::Coincident, [0, 1, 2], [0, 1, 2]);
                }
                let other = self.mesh.triangles()[u];
                // Shared vertices in increasing global index, so that both
                // panels of a pair agree on the parametrisation.
                let mut shared: Vec<(usize, usize, usize)> = tri
                    .iter()
                    .enumerate()
                    .filter_map(|(la, &va)| other.iter().position(|&vb| vb == va).map(|lb| (va, la, lb)))
                    .collect();
                shared.sort_unstable();
                let mut pa: Vec<usize> = shared.iter().map(|s| s.1).collect();
                let mut pb: Vec<usize> = shared.iter().map(|s| s.2).collect();
                let contact = if pa.len() == 2 { Contact::Edge } else { Contact::Vertex };
                for k in 0..3 {
                    if !pa.contains(&k) {
                        pa.push(k);
                    }
                    if !pb.contains(&k) {
                        pb.push(k);
                    }
                }
                (u, contact, [pa[0], pa[1], pa[2]], [pb[0], pb[1], pb[2]])
            })
            .collect()
    }
}

fn regular_order(params: &KernelParams, x: &Panel, y: &Panel) -> usize {
    let h = x.diam.max(y.diam);
    let d = x.gap(y);
    let base = params.quadrature.regular_order;
    let n = if d > 3.0 * h {
        base
    } else if d > h {
        base + 1
    } else if d > 0.25 * h {
        base + 2
    } else {
        base + 4
    };
    let oscillation = (params.kappa.im.abs() * h / 2.0).ceil() as usize;
    (n + oscillation).min(MAX_ORDER)
}

/// Full pair integrals over two disjoint panels with tensor Gauss rules.
fn regular_pair(params: &KernelParams, geo: &Geometry, tx: usize, ty: usize, order: usize) -> PairIntegrals {
    let (px, py) = (&geo.panels[tx], &geo.panels[ty]);
    let (rx, ry) = (geo.rule(tx, order), geo.rule(ty, order));
    let mut out = PairIntegrals::ZERO;
    for (p, x) in rx.points.iter().enumerate() {
        let mut se = [ZERO; 3];
        let mut sj = [ZERO; 3];
        let mut sjp = ZERO;
        for (q, y) in ry.points.iter().enumerate() {
            let d = x - y;
            let r = d.norm();
            let (e, g) = params.green_and_gradient_factor(r);
            let w = ry.weights[q];
            let ew = e * w;
            let gy = g * (w * py.normal.dot(&d));
            sjp += g * (-w * px.normal.dot(&d));
            for b in 0..3 {
                se[b] += ew * ry.bary[q][b];
                sj[b] += gy * ry.bary[q][b];
            }
        }
        let wx = rx.weights[p];
        for a in 0..3 {
            let la = wx * rx.bary[p][a];
            for b in 0..3 {
                out.i[a][b] += se[b] * la;
            }
            out.jp[a] += sjp * la;
        }
        for b in 0..3 {
            out.j[b] += sj[b] * wx;
        }
    }
    out
}

fn regular_single_layer(params: &KernelParams, geo: &Geometry, tx: usize, ty: usize, order: usize) -> C {
    let (rx, ry) = (geo.rule(tx, order), geo.rule(ty, order));
    let mut acc = ZERO;
    for (p, x) in rx.points.iter().enumerate() {
        let mut s = ZERO;
        for (q, y) in ry.points.iter().enumerate() {
            s += params.green((x - y).norm()) * ry.weights[q];
        }
        acc += s * rx.weights[p];
    }
    acc
}

/// Pair integrals over touching panels with the singular rules; the
/// permutations place the shared vertices first in both panels.
fn singular_pair(
    params: &KernelParams,
    geo: &Geometry,
    tx: usize,
    ty: usize,
    contact: Contact,
    perm_x: [usize; 3],
    perm_y: [usize; 3],
) -> PairIntegrals {
    let (px, py) = (&geo.panels[tx], &geo.panels[ty]);
    let cx = perm_x.map(|k| px.corners[k]);
    let cy = perm_y.map(|k| py.corners[k]);
    let map = |c: &[Vec3; 3], u: [f64; 2]| c[0] + u[0] * (c[1] - c[0]) + u[1] * (c[2] - c[1]);
    let jac = 4.0 * px.area * py.area;
    let mut out = PairIntegrals::ZERO;
    for pt in quadrature::singular(contact, params.quadrature.singular_order) {
        let x = map(&cx, pt.x);
        let y = map(&cy, pt.y);
        let d = x - y;
        let r = d.norm();
        let (e, g) = params.green_and_gradient_factor(r);
        let w = pt.w * jac;
        let bx = bary(pt.x);
        let by = bary(pt.y);
        let gy = g * (w * py.normal.dot(&d));
        let gx = g * (-w * px.normal.dot(&d));
        let ew = e * w;
        for a in 0..3 {
            let la = bx[a];
            for b in 0..3 {
                out.i[perm_x[a]][perm_y[b]] += ew * (la * by[b]);
            }
            out.jp[perm_x[a]] += gx * la;
        }
        for b in 0..3 {
            out.j[perm_y[b]] += gy * by[b];
        }
    }
    out
}

/// Touching pairs are always integrated with the lower index as test panel
/// and transposed otherwise, so that the assembled matrices keep exact
/// transpose relations.
fn touching_pair(
    params: &KernelParams,
    geo: &Geometry,
    tx: usize,
    ty: usize,
    contact: Contact,
    perm_x: [usize; 3],
    perm_y: [usize; 3],
) -> PairIntegrals {
    if tx <= ty {
        singular_pair(params, geo, tx, ty, contact, perm_x, perm_y)
    } else {
        singular_pair(params, geo, ty, tx, contact, perm_y, perm_x).transposed()
    }
}

/// Dense Galerkin matrices of the four boundary integral operators.
#[derive(Clone, Debug)]
pub struct BioMatrices {
    /// P0 x P0.
    pub v: DMatrix<C>,
    /// P0 test x P1 trial.
    pub k: DMatrix<C>,
    /// P1 test x P0 trial.
    pub kp: DMatrix<C>,
    /// P1 x P1.
    pub w: DMatrix<C>,
    pub kappa: C,
}

struct RowBlock {
    v: Vec<C>,
    k: Vec<C>,
    kp: [Vec<C>; 3],
    w: [Vec<C>; 3],
}

fn max_order_used(params: &KernelParams, mesh: &SurfaceMesh) -> usize {
    let h = mesh.mesh_size();
    let oscillation = (params.kappa.im.abs() * h / 2.0).ceil() as usize;
    (params.quadrature.regular_order + 4 + oscillation).min(MAX_ORDER)
}

fn assemble_row(params: &KernelParams, geo: &Geometry, tx: usize, with_all: bool) -> RowBlock {
    let nt = geo.panels.len();
    let nv = geo.mesh.n_vertices();
    let px = &geo.panels[tx];
    let mut row = RowBlock {
        v: vec![ZERO; nt],
        k: if with_all { vec![ZERO; nv] } else { Vec::new() },
        kp: if with_all { [vec![ZERO; nt], vec![ZERO; nt], vec![ZERO; nt]] } else { Default::default() },
        w: if with_all { [vec![ZERO; nv], vec![ZERO; nv], vec![ZERO; nv]] } else { Default::default() },
    };
    let contacts = geo.contacts(tx);
    let mut touching = vec![None; nt];
    for &(ty, contact, pa, pb) in &contacts {
        touching[ty] = Some((contact, pa, pb));
    }
    let k2 = params.kappa * params.kappa;
    for ty in 0..nt {
        let py = &geo.panels[ty];
        let pair = match touching[ty] {
            Some((contact, pa, pb)) => touching_pair(params, geo, tx, ty, contact, pa, pb),
            None => {
                if params.kappa.re * px.gap(py) > DECAY_CUTOFF {
                    continue;
                }
                let order = regular_order(params, px, py);
                if !with_all {
                    row.v[ty] = regular_single_layer(params, geo, tx, ty, order);
                    continue;
                }
                regular_pair(params, geo, tx, ty, order)
            }
        };
        let total = pair.total();
        row.v[ty] = total;
        if !with_all {
            continue;
        }
        let tri_y = geo.mesh.triangles()[ty];
        let nn = px.normal.dot(&py.normal);
        for b in 0..3 {
            row.k[tri_y[b]] += pair.j[b];
        }
        for a in 0..3 {
            row.kp[a][ty] += pair.jp[a];
            for b in 0..3 {
                let curl = px.curls[a].dot(&py.curls[b]);
                row.w[a][tri_y[b]] += total * curl + k2 * nn * pair.i[a][b];
            }
        }
    }
    row
}

fn assemble_rows(params: &KernelParams, mesh: &SurfaceMesh, with_all: bool) -> BioMatrices {
    let geo = Geometry::new(mesh, max_order_used(params, mesh));
    let nt = mesh.n_triangles();
    let nv = mesh.n_vertices();
    let mut v = DMatrix::zeros(nt, nt);
    let (mut k, mut kp, mut w) = if with_all {
        (DMatrix::zeros(nt, nv), DMatrix::zeros(nv, nt), DMatrix::zeros(nv, nv))
    } else {
        (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
    };
    let mut start = 0;
    while start < nt {
        let end = (start + ROW_BATCH).min(nt);
        let rows: Vec<RowBlock> = (start..end)
            .into_par_iter()
            .map(|tx| assemble_row(params, &geo, tx, with_all))
            .collect();
        for (offset, row) in rows.into_iter().enumerate() {
            let tx = start + offset;
            for (ty, val) in row.v.into_iter().enumerate() {
                v[(tx, ty)] = val;
            }
            if !with_all {
                continue;
            }
            for (c, val) in row.k.into_iter().enumerate() {
                k[(tx, c)] = val;
            }
            let tri = mesh.triangles()[tx];
            for a in 0..3 {
                for (ty, val) in row.kp[a].iter().enumerate() {
                    kp[(tri[a], ty)] += val;
                }
                for (c, val) in row.w[a].iter().enumerate() {
                    w[(tri[a], c)] += val;
                }
            }
        }
        start = end;
    }
    BioMatrices {
        v,
        k,
        kp,
        w,
        kappa: params.kappa,
    }
}

impl BioMatrices {
    pub fn assemble(params: &KernelParams, mesh: &SurfaceMesh) -> Self {
        assemble_rows(params, mesh, true)
    }

    pub fn conj(&self) -> Self {
        BioMatrices {
            v: self.v.conjugate(),
            k: self.k.conjugate(),
            kp: self.kp.conjugate(),
            w: self.w.conjugate(),
            kappa: self.kappa.conj(),
        }
    }
}

/// Single layer matrix alone (cheaper than the full set).
pub fn assemble_v(params: &KernelParams, mesh: &SurfaceMesh) -> DMatrix<C> {
    assemble_rows(params, mesh, false).v
}

pub fn assemble_k(params: &KernelParams, mesh: &SurfaceMesh) -> DMatrix<C> {
    BioMatrices::assemble(params, mesh).k
}

pub fn assemble_kp(params: &KernelParams, mesh: &SurfaceMesh) -> DMatrix<C> {
    BioMatrices::assemble(params, mesh).kp
}

pub fn assemble_w(params: &KernelParams, mesh: &SurfaceMesh) -> DMatrix<C> {
    BioMatrices::assemble(params, mesh).w
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bem::kernel::QuadratureConfig;
    use crate::mesh::sphere_surface;

    fn params(kappa: C) -> KernelParams {
        KernelParams::with_kappa(kappa, QuadratureConfig::default()).unwrap()
    }

    /// `(int_T 1/|x - y| dy, int_T |x - y| dy)` for `x` in the plane of a
    /// flat triangle, in closed form. Each edge contributes through its
    /// signed distance `d` from `x` and the tangent coordinates `s0 < s1`
    /// of its endpoints.
    pub(crate) fn in_plane_potentials(corners: [Vec3; 3], x: Vec3) -> (f64, f64) {
        let n = (corners[1] - corners[0]).cross(&(corners[2] - corners[0])).normalize();
        let (mut inv, mut lin) = (0.0, 0.0);
        for k in 0..3 {
            let a = corners[k];
            let b = corners[(k + 1) % 3];
            let t = (b - a).normalize();
            let m = t.cross(&n);
            let d = (a - x).dot(&m);
            if d.abs() < 1e-300 {
                continue;
            }
            let s0 = (a - x).dot(&t);
            let s1 = (b - x).dot(&t);
            let r0 = (d * d + s0 * s0).sqrt();
            let r1 = (d * d + s1 * s1).sqrt();
            // s + r loses digits for s << 0; use d^2 / (r - s) there.
            let plus = |s: f64, r: f64| if s >= 0.0 { s + r } else { d * d / (r - s) };
            let log = (plus(s1, r1) / plus(s0, r0)).ln();
            inv += d * log;
            lin += d / 6.0 * (s1 * r1 - s0 * r0 + d * d * log);
        }
        (inv, lin)
    }

    /// Outer rule on a triangle graded towards all three edges and corners:
    /// a cone from corner 2 with polynomial grading in both directions.
    fn graded_rule(c: [Vec3; 3], n: usize) -> Vec<(Vec3, f64)> {
        let g = quadrature::gauss(n);
        let area = 0.5 * (c[1] - c[0]).cross(&(c[2] - c[0])).norm();
        let grade = |u: f64| (u * u * u * (10.0 - 15.0 * u + 6.0 * u * u), 30.0 * u * u * (1.0 - u) * (1.0 - u));
        let mut out = Vec::new();
        for (u, wu) in g.points.iter().zip(&g.weights) {
            for (v, wv) in g.points.iter().zip(&g.weights) {
                let (t, dt) = grade(*u);
                let (xi, dxi) = grade(*v);
                let edge = c[0] + xi * (c[1] - c[0]);
                let x = c[2] + t * (edge - c[2]);
                // dA = 2 |T| t dt dxi
                out.push((x, wu * wv * dt * dxi * 2.0 * area * t));
            }
        }
        out
    }

    /// Oracle for `int_Tx int_Ty e^{-kappa r}/(4 pi r)` on coplanar
    /// triangles: the `1/r`, constant and `r` terms of the expansion are
    /// integrated with the closed forms above and a graded outer rule,
    /// the `O(r^2)` remainder with a plain tensor rule.
    fn single_layer_oracle(kappa: C, tx: [Vec3; 3], ty: [Vec3; 3]) -> C {
        let area = |c: [Vec3; 3]| 0.5 * (c[1] - c[0]).cross(&(c[2] - c[0])).norm();
        let map = |c: [Vec3; 3], u: [f64; 2]| c[0] + u[0] * (c[1] - c[0]) + u[1] * (c[2] - c[1]);
        let (mut inv, mut lin) = (0.0, 0.0);
        for (x, w) in graded_rule(tx, 40) {
            let (a, b) = in_plane_potentials(ty, x);
            inv += w * a;
            lin += w * b;
        }
        let mut rest = ZERO;
        let rule = quadrature::triangle(20);
        for p in rule {
            let x = map(tx, p.x);
            for q in rule {
                let r = (map(ty, q.x) - x).norm();
                let kr = kappa * r;
                let g = if kr.norm() < 1e-2 {
                    // -k^3 r^2/6 + k^4 r^3/24 - k^5 r^4/120 + ...
                    let mut term = -kappa * kr * kr / 6.0;
                    let mut sum = ZERO;
                    for m in 3..20 {
                        sum += term;
                        term *= -kr / (m as f64 + 1.0);
                    }
                    sum
                } else {
                    ((-kr).exp() - 1.0) / r + kappa - kappa * kr / 2.0
                };
                rest += g * (p.w * 2.0 * area(tx) * q.w * 2.0 * area(ty));
            }
        }
        let total = inv - kappa * area(tx) * area(ty) + kappa * kappa / 2.0 * lin + rest;
        total / (4.0 * std::f64::consts::PI)
    }

    #[test]
    fn in_plane_closed_forms_match_brute_force() {
        let c = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.3, 0.05, 0.0), Vec3::new(0.1, 0.25, 0.0)];
        let x = Vec3::new(0.5, -0.2, 0.0);
        let (inv, lin) = in_plane_potentials(c, x);
        let area = 0.5 * (c[1] - c[0]).cross(&(c[2] - c[0])).norm();
        let (mut a, mut b) = (0.0, 0.0);
        for p in quadrature::triangle(20) {
            let y = c[0] + p.x[0] * (c[1] - c[0]) + p.x[1] * (c[2] - c[1]);
            let r = (x - y).norm();
            a += p.w * 2.0 * area / r;
            b += p.w * 2.0 * area * r;
        }
        assert!((inv - a).abs() < 1e-13 * a, "{inv} {a}");
        assert!((lin - b).abs() < 1e-13 * b, "{lin} {b}");
    }

    #[test]
    fn singular_rules_match_closed_form_oracle() {
        let p0 = Vec3::new(0.0, 0.0, 0.0);
        let p1 = Vec3::new(0.3, 0.05, 0.0);
        let p2 = Vec3::new(0.1, 0.25, 0.0);
        let p3 = Vec3::new(0.32, 0.3, 0.0);
        let p4 = Vec3::new(-0.2, -0.15, 0.0);
        let p5 = Vec3::new(-0.05, -0.3, 0.0);
        let kappa = C::new(2.0, 3.0);
        // Coplanar so that the oracle's in-plane formula applies exactly.
        let verts = vec![p0, p1, p2, p3, p4, p5];
        let tris = [[0, 1, 2], [1, 3, 2], [0, 4, 5]];
        // Build a small open "mesh" by hand: a Geometry needs only corners.
        let panel = |t: [usize; 3]| -> Panel {
            let corners = t.map(|i| verts[i]);
            let cr = (corners[1] - corners[0]).cross(&(corners[2] - corners[0]));
            let area = 0.5 * cr.norm();
            let centroid = (corners[0] + corners[1] + corners[2]) / 3.0;
            Panel {
                corners,
                normal: cr.normalize(),
                area,
                centroid,
                radius: 1.0,
                diam: 1.0,
                curls: [Vec3::zeros(); 3],
            }
        };
        let pr = KernelParams::with_kappa(
            kappa,
            QuadratureConfig {
                regular_order: 3,
                singular_order: 10,
            },
        )
        .unwrap();
        let placeholder = sphere_surface(0, 1.0);
        let geo = Geometry {
            mesh: &placeholder,
            panels: tris.iter().map(|&t| panel(t)).collect(),
            rules: Vec::new(),
            vertex_triangles: Vec::new(),
        };
        let single = |a: usize, b: usize, contact, pa, pb| -> C { singular_pair(&pr, &geo, a, b, contact, pa, pb).total() };
        let cases = [
            (0, 0, Contact::Coincident, [0, 1, 2], [0, 1, 2]),
            // shared edge p1-p2: local (1,2) in tri 0 and (0,2) in tri 1
            (0, 1, Contact::Edge, [1, 2, 0], [0, 2, 1]),
            // shared vertex p0
            (0, 2, Contact::Vertex, [0, 1, 2], [0, 1, 2]),
        ];
        for (a, b, contact, pa, pb) in cases {
            let got = single(a, b, contact, pa, pb);
            let oracle = single_layer_oracle(kappa, tris[a].map(|i| verts[i]), tris[b].map(|i| verts[i]));
            let rel = (got - oracle).norm() / oracle.norm();
            assert!(rel < 1e-8, "{contact:?}: {got} vs {oracle} ({rel:e})");
        }
    }

    #[test]
    fn transpose_relations_are_exact() {
        let mesh = sphere_surface(1, 1.0);
        let m = BioMatrices::assemble(&params(C::new(1.0, 2.0)), &mesh);
        let v_asym = (&m.v - m.v.transpose()).norm() / m.v.norm();
        assert!(v_asym < 1e-13, "{v_asym}");
        let w_asym = (&m.w - m.w.transpose()).norm() / m.w.norm();
        assert!(w_asym < 1e-13, "{w_asym}");
        let k_dual = (&m.kp - m.k.transpose()).norm() / m.k.norm();
        assert!(k_dual < 1e-13, "{k_dual}");
        assert!(m.v.iter().chain(m.w.iter()).all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn single_layer_only_mode_agrees() {
        let mesh = sphere_surface(1, 1.0);
        let p = params(C::new(0.5, -4.0));
        let full = BioMatrices::assemble(&p, &mesh).v;
        let only = assemble_v(&p, &mesh);
        assert!((&full - &only).norm() < 1e-13 * full.norm());
    }

    #[test]
    fn conjugate_frequency_gives_conjugate_matrices() {
        let mesh = sphere_surface(1, 1.0);
        let a = BioMatrices::assemble(&params(C::new(0.7, 3.0)), &mesh);
        let b = BioMatrices::assemble(&params(C::new(0.7, -3.0)), &mesh);
        for (x, y) in [(&a.v, &b.v), (&a.k, &b.k), (&a.kp, &b.kp), (&a.w, &b.w)] {
            assert!((x - y.conjugate()).norm() <= 1e-14 * x.norm());
        }
    }

    #[test]
    fn uniform_density_single_layer_on_sphere() {
        // Uniform unit density on the unit sphere: the potential on the
        // sphere is e^{-kappa} sinh(kappa) / kappa.
        let kappa: f64 = 1.5;
        let exact = (-kappa).exp() * kappa.sinh() / kappa;
        let mut errors = Vec::new();
        for level in 1..=3 {
            let mesh = sphere_surface(level, 1.0);
            let v = assemble_v(&params(C::new(kappa, 0.0)), &mesh);
            let total: C = v.iter().sum();
            errors.push((total.re / mesh.total_area() - exact).abs() / exact);
        }
        assert!(errors[2] < 0.01, "{errors:?}");
        assert!(errors[0] / errors[1] > 1.8 && errors[1] / errors[2] > 1.8, "{errors:?}");
    }

    #[test]
    fn laplace_limit() {
        let mesh = sphere_surface(2, 1.0);
        let m = BioMatrices::assemble(&params(C::new(0.0, 0.0)), &mesh);
        let total: C = m.v.iter().sum();
        assert!((total.re / mesh.total_area() - 1.0).abs() < 0.02);
        // W annihilates constants at kappa = 0 exactly (curls of a
        // partition of unity sum to zero).
        let ones = nalgebra::DVector::from_element(mesh.n_vertices(), C::new(1.0, 0.0));
        assert!((&m.w * &ones).norm() < 1e-12 * m.w.norm());
        let small = BioMatrices::assemble(&params(C::new(1e-3, 0.0)), &mesh);
        assert!((&small.w * &ones).norm() < 1e-5 * small.w.norm());
    }
}
