//! Gauss rules on intervals and triangles, and the singular four-dimensional
//! rules for pairs of triangles that touch.
//!
//! Triangles are parametrised over the reference triangle
//! `{(x1, x2) : 0 <= x2 <= x1 <= 1}` by
//! `x = P0 + x1 (P1 - P0) + x2 (P2 - P1)`, so the barycentric coordinates are
//! `(1 - x1, x1 - x2, x2)` and the Jacobian is twice the area.

use std::sync::OnceLock;

use crate::error::{FsiError, Result};

/// Highest supported number of Gauss points per direction.
pub const MAX_ORDER: usize = 24;

/// Gauss-Legendre points and weights on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_on_unit(n: usize) -> GaussRule {
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    GaussRule { points, weights }
}

/// Cached Gauss-Legendre rule with `n` points on `[0, 1]`.
pub fn gauss(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_ORDER).map(|k| legendre_on_unit(k.max(1))).collect());
    &rules[n.clamp(1, MAX_ORDER)]
}

pub fn check_order(n: usize) -> Result<usize> {
    if n == 0 || n > MAX_ORDER {
        return Err(FsiError::Quadrature(format!(
            "order {n} outside 1..={MAX_ORDER}"
        )));
    }
    Ok(n)
}

/// Point of the reference triangle with its weight (weights sum to 1/2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefPoint {
    pub x: [f64; 2],
    pub w: f64,
}

impl RefPoint {
    /// Barycentric coordinates `(1 - x1, x1 - x2, x2)`.
    #[inline]
    pub fn bary(&self) -> [f64; 3] {
        bary(self.x)
    }
}

#[inline]
pub fn bary(x: [f64; 2]) -> [f64; 3] {
    [1.0 - x[0], x[0] - x[1], x[1]]
}

/// Collapsed tensor Gauss rule on the reference triangle, exact for
/// polynomials of degree `2n - 2`.
pub fn triangle_rule(n: usize) -> Vec<RefPoint> {
    let g = gauss(n);
    let mut out = Vec::with_capacity(n * n);
    for (xi, wxi) in g.points.iter().zip(&g.weights) {
        for (eta, weta) in g.points.iter().zip(&g.weights) {
            out.push(RefPoint {
                x: [*xi, xi * eta],
                w: wxi * weta * xi,
            });
        }
    }
    out
}

/// Cached triangle rule.
pub fn triangle(n: usize) -> &'static [RefPoint] {
    static RULES: OnceLock<Vec<Vec<RefPoint>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_ORDER).map(|k| triangle_rule(k.max(1))).collect());
    &rules[n.clamp(1, MAX_ORDER)]
}

/// How two triangles of a surface mesh touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Contact {
    Coincident,
    /// Shared edge `P0 P1` in both parametrisations.
    Edge,
    /// Shared vertex `P0` in both parametrisations.
    Vertex,
    Disjoint,
}

/// Pair of reference points with a weight such that
/// `sum w k(x, y)` approximates the integral of `k` over the product of
/// two reference triangles (total measure 1/4).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairPoint {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub w: f64,
}

/// Singular rule for a touching pair, built from `n`-point Gauss rules in
/// each of the four variables of the unit hypercube.
pub fn singular_rule(contact: Contact, n: usize) -> Vec<PairPoint> {
    let g = gauss(n);
    let mut out = Vec::new();
    let nodes: Vec<(f64, f64)> = g.points.iter().copied().zip(g.weights.iter().copied()).collect();
    for &(xi, w0) in &nodes {
        for &(e1, w1) in &nodes {
            for &(e2, w2) in &nodes {
                for &(e3, w3) in &nodes {
                    let w = w0 * w1 * w2 * w3;
                    match contact {
                        Contact::Coincident => {
                            let jac = w * xi.powi(3) * e1 * e1 * e2;
                            let a = [xi, xi * (1.0 - e1 + e1 * e2)];
                            let b = [xi * (1.0 - e1 * e2 * e3), xi * (1.0 - e1)];
                            let c = [xi, xi * e1 * (1.0 - e2 + e2 * e3)];
                            let d = [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)];
                            let e = [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)];
                            let f = [xi, xi * e1 * (1.0 - e2)];
                            for (x, y) in [(a, b), (b, a), (c, d), (d, c), (e, f), (f, e)] {
                                out.push(PairPoint { x, y, w: jac });
                            }
                        }
                        Contact::Edge => {
                            let base = w * xi.powi(3) * e1 * e1;
                            out.push(PairPoint {
                                x: [xi, xi * e1 * e3],
                                y: [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                                w: base,
                            });
                            let wb = base * e2;
                            out.push(PairPoint {
                                x: [xi, xi * e1],
                                y: [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)],
                                w: wb,
                            });
                            out.push(PairPoint {
                                x: [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                                y: [xi, xi * e1 * e2 * e3],
                                w: wb,
                            });
                            out.push(PairPoint {
                                x: [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)],
                                y: [xi, xi * e1],
                                w: wb,
                            });
                            out.push(PairPoint {
                                x: [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)],
                                y: [xi, xi * e1 * e2],
                                w: wb,
                            });
                        }
                        Contact::Vertex => {
                            let jac = w * xi.powi(3) * e2;
                            let a = [xi, xi * e1];
                            let b = [xi * e2, xi * e2 * e3];
                            out.push(PairPoint { x: a, y: b, w: jac });
                            out.push(PairPoint { x: b, y: a, w: jac });
                        }
                        Contact::Disjoint => {
                            // Plain tensor rule over both collapsed triangles.
                            out.push(PairPoint {
                                x: [xi, xi * e1],
                                y: [e2, e2 * e3],
                                w: w * xi * e2,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Cached singular rules, indexed by contact type and order.
pub fn singular(contact: Contact, n: usize) -> &'static [PairPoint] {
    static RULES: OnceLock<Vec<[Vec<PairPoint>; 4]>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=MAX_ORDER.min(12))
            .map(|k| {
                let k = k.max(1);
                [
                    singular_rule(Contact::Coincident, k),
                    singular_rule(Contact::Edge, k),
                    singular_rule(Contact::Vertex, k),
                    singular_rule(Contact::Disjoint, k),
                ]
            })
            .collect()
    });
    let idx = match contact {
        Contact::Coincident => 0,
        Contact::Edge => 1,
        Contact::Vertex => 2,
        Contact::Disjoint => 3,
    };
    &rules[n.clamp(1, MAX_ORDER.min(12))][idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_monomials() {
        for n in 1..=MAX_ORDER {
            let g = gauss(n);
            for p in 0..(2 * n) {
                let q: f64 = g.points.iter().zip(&g.weights).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_rule_exact_for_polynomials() {
        // int over {0<=x2<=x1<=1} of x1^a x2^b = 1 / ((b+1)(a+b+2))
        for n in 1..8 {
            let r = triangle(n);
            for a in 0..(2 * n - 1) {
                for b in 0..(2 * n - 1 - a) {
                    let q: f64 = r.iter().map(|p| p.w * p.x[0].powi(a as i32) * p.x[1].powi(b as i32)).sum();
                    let exact = 1.0 / ((b as f64 + 1.0) * (a as f64 + b as f64 + 2.0));
                    assert!((q - exact).abs() < 1e-14, "n={n} a={a} b={b}");
                }
            }
        }
    }

    fn poly(x: [f64; 2], y: [f64; 2]) -> f64 {
        1.0 + x[0] * x[0] * y[1] - 3.0 * x[1] * y[0] * y[0] + 0.5 * x[0] * x[1] * y[0] * y[1] + y[1].powi(3)
    }

    #[test]
    fn singular_rules_partition_the_product_domain() {
        let reference: f64 = singular(Contact::Disjoint, 6).iter().map(|p| p.w * poly(p.x, p.y)).sum();
        for contact in [Contact::Coincident, Contact::Edge, Contact::Vertex, Contact::Disjoint] {
            let rule = singular(contact, 6);
            let total: f64 = rule.iter().map(|p| p.w).sum();
            assert!((total - 0.25).abs() < 1e-13, "{contact:?}: {total}");
            let q: f64 = rule.iter().map(|p| p.w * poly(p.x, p.y)).sum();
            assert!((q - reference).abs() < 1e-12, "{contact:?}: {q} vs {reference}");
            for p in rule {
                for z in [p.x, p.y] {
                    assert!(z[1] >= -1e-15 && z[1] <= z[0] + 1e-15 && z[0] <= 1.0 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn coincident_rule_converges_for_inverse_distance() {
        // 1/|x-y| over coincident reference triangles is finite; the rule
        // converges as the order grows.
        let f = |n: usize| -> f64 {
            singular(Contact::Coincident, n)
                .iter()
                .map(|p| p.w / ((p.x[0] - p.y[0]).powi(2) + (p.x[1] - p.y[1]).powi(2)).sqrt())
                .sum()
        };
        let reference = f(12);
        assert!((f(8) - reference).abs() < 2e-7 * reference);
        assert!((f(10) - reference).abs() < 1e-8 * reference);
    }
}
