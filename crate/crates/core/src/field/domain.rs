//! Volume domains for integrating analytic fields.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::analytic::AnalyticField;
use super::expr::Expr;
use super::SobolevNorm;
use crate::geometry::{surface_rule, SurfaceGeometry, SurfaceNode, SurfaceRuleSpec, Vec3};
use crate::quadrature::{gauss_legendre, trapezoid_periodic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Ball { radius: f64 },
    /// `[0, lx) × [0, ly) × [-1, 1]`, periodic in `x, y`.
    Channel { lx: f64, ly: f64 },
    /// `[0, length)^3`, periodic in every direction.
    PeriodicBox { length: f64 },
}

impl Domain {
    pub fn unit_ball() -> Self {
        Domain::Ball { radius: 1.0 }
    }

    pub fn channel_2pi() -> Self {
        Domain::Channel { lx: TAU, ly: TAU }
    }

    pub fn box_2pi() -> Self {
        Domain::PeriodicBox { length: TAU }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Ball { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            Domain::Channel { lx, ly } => 2.0 * lx * ly,
            Domain::PeriodicBox { length } => length.powi(3),
        }
    }

    /// Boundary pieces with their outward normals.
    pub fn boundary(&self) -> Vec<SurfaceGeometry> {
        match *self {
            Domain::Ball { radius } if radius == 1.0 => vec![SurfaceGeometry::UnitSphere],
            Domain::Ball { radius } => vec![SurfaceGeometry::sphere(radius)],
            Domain::Channel { .. } => vec![SurfaceGeometry::flat_wall(1.0, 1), SurfaceGeometry::flat_wall(-1.0, -1)],
            Domain::PeriodicBox { .. } => Vec::new(),
        }
    }

    /// Boundary quadrature nodes; `n1 x n2` per piece.
    pub fn boundary_nodes(&self, n1: usize, n2: usize) -> Vec<SurfaceNode> {
        let spec = match *self {
            Domain::Channel { lx, ly } => SurfaceRuleSpec::new(n1, n2).with_patch([0.0, lx, 0.0, ly]),
            _ => SurfaceRuleSpec::new(n1, n2),
        };
        self.boundary().iter().flat_map(|s| surface_rule(s, &spec)).collect()
    }

    /// Product rule with `n` nodes per direction: Gauss–Legendre radius ×
    /// the sphere rule for the ball, trapezoid × trapezoid × Gauss–Legendre
    /// for the channel, trapezoid cubed for the box.
    pub fn volume_rule(&self, n: usize) -> Vec<(Vec3, f64)> {
        match *self {
            Domain::Ball { radius } => {
                let gr = gauss_legendre(n).mapped(0.0, radius);
                let sphere = surface_rule(&SurfaceGeometry::UnitSphere, &SurfaceRuleSpec::new(n, n));
                let mut out = Vec::with_capacity(n * sphere.len());
                for (&r, &wr) in gr.nodes.iter().zip(&gr.weights) {
                    for node in &sphere {
                        out.push((node.x * r, wr * r * r * node.weight));
                    }
                }
                out
            }
            Domain::Channel { lx, ly } => {
                let tx = trapezoid_periodic(n, 0.0, lx);
                let ty = trapezoid_periodic(n, 0.0, ly);
                let gz = gauss_legendre(n);
                let mut out = Vec::with_capacity(n * n * n);
                for (&x, &wx) in tx.nodes.iter().zip(&tx.weights) {
                    for (&y, &wy) in ty.nodes.iter().zip(&ty.weights) {
                        for (&z, &wz) in gz.nodes.iter().zip(&gz.weights) {
                            out.push((Vec3::new(x, y, z), wx * wy * wz));
                        }
                    }
                }
                out
            }
            Domain::PeriodicBox { length } => {
                let t = trapezoid_periodic(n, 0.0, length);
                let mut out = Vec::with_capacity(n * n * n);
                for (&x, &wx) in t.nodes.iter().zip(&t.weights) {
                    for (&y, &wy) in t.nodes.iter().zip(&t.weights) {
                        for (&z, &wz) in t.nodes.iter().zip(&t.weights) {
                            out.push((Vec3::new(x, y, z), wx * wy * wz));
                        }
                    }
                }
                out
            }
        }
    }
}

/// `sum_i int |e_i|^2` over a volume rule.
pub fn integrate_squares(exprs: &[Expr], rule: &[(Vec3, f64)]) -> f64 {
    if exprs.iter().all(Expr::is_zero) {
        return 0.0;
    }
    rule.iter()
        .map(|(x, w)| w * exprs.iter().map(|e| e.eval(x).powi(2)).sum::<f64>())
        .sum()
}

/// Multi-indices of total order `m`, each once.
pub fn multi_indices(m: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in (0..=m).rev() {
        for b in (0..=(m - a)).rev() {
            out.push([a, b, m - a - b]);
        }
    }
    out
}

/// Number of ordered index tuples with the given multi-index, `m! / (a! b! c!)`.
pub fn multinomial(alpha: [usize; 3]) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    fact(alpha.iter().sum()) / alpha.iter().map(|&a| fact(a)).product::<f64>()
}

/// Full H^r norm of an analytic field over a domain, plus the curl variant.
pub fn sobolev_norm(u: &AnalyticField, r: usize, domain: &Domain, n: usize) -> SobolevNorm {
    let rule = domain.volume_rule(n);
    let breakdown = (0..=r)
        .map(|m| {
            let exprs: Vec<Expr> = multi_indices(m)
                .into_iter()
                .flat_map(|alpha| (0..3).map(move |i| (i, alpha)))
                .map(|(i, alpha)| u.derivative_expr(i, alpha))
                .collect();
            integrate_squares(&exprs, &rule)
        })
        .collect();
    let mut curl_breakdown = Vec::with_capacity(r + 1);
    let mut q = u.clone();
    for l in 0..=r {
        curl_breakdown.push(integrate_squares(q.components(), &rule));
        if l < r {
            q = q.curl();
        }
    }
    SobolevNorm::new(r, breakdown, curl_breakdown)
}
