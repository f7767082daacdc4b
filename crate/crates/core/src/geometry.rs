//! Analytic boundary surfaces: normals, shape operator, curvatures, the
//! tangential projection and the in-plane rotation.
//!
//! Every surface is the zero set of a level-set function `phi` with exact
//! gradient and Hessian. The unit normal is extended off the surface as the
//! unit gradient field `grad phi / |grad phi|`, and the second fundamental
//! form follows the convention `II = -grad n` with the outward normal, so
//! that `II` is negative definite on a sphere.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, trapezoid_periodic};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A point counts as "on the surface" when `|phi(x)| < ON_SURFACE_TOL`.
pub const ON_SURFACE_TOL: f64 = 1e-10;

/// Tolerance for `|v . n|` when a vector must be tangent.
pub const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceGeometry {
    UnitSphere,
    Sphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// The plane `z = z0`. `orientation = +1` points the normal along +z,
    /// i.e. the fluid lies below the wall.
    FlatWall { z0: f64, orientation: i8 },
}

impl SurfaceGeometry {
    pub fn sphere(radius: f64) -> Self {
        SurfaceGeometry::Sphere { radius }
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        SurfaceGeometry::Ellipsoid { a, b, c }
    }

    pub fn flat_wall(z0: f64, orientation: i8) -> Self {
        SurfaceGeometry::FlatWall { z0, orientation: if orientation >= 0 { 1 } else { -1 } }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurfaceGeometry::UnitSphere => "unit_sphere",
            SurfaceGeometry::Sphere { .. } => "sphere",
            SurfaceGeometry::Ellipsoid { .. } => "ellipsoid",
            SurfaceGeometry::FlatWall { .. } => "flat_wall",
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, SurfaceGeometry::FlatWall { .. })
    }

    pub fn semi_axes(&self) -> Option<[f64; 3]> {
        match *self {
            SurfaceGeometry::UnitSphere => Some([1.0; 3]),
            SurfaceGeometry::Sphere { radius } => Some([radius; 3]),
            SurfaceGeometry::Ellipsoid { a, b, c } => Some([a, b, c]),
            SurfaceGeometry::FlatWall { .. } => None,
        }
    }

    /// Level-set value. For spheres `(|x|^2 - R^2) / 2R`, which has unit
    /// gradient on the surface; for ellipsoids `(sum x_i^2/a_i^2 - 1) / 2`;
    /// for flat walls the signed height `orientation (z - z0)`.
    pub fn level(&self, x: &Vec3) -> f64 {
        match *self {
            SurfaceGeometry::FlatWall { z0, orientation } => f64::from(orientation) * (x.z - z0),
            SurfaceGeometry::Ellipsoid { a, b, c } => {
                0.5 * ((x.x / a).powi(2) + (x.y / b).powi(2) + (x.z / c).powi(2) - 1.0)
            }
            _ => {
                let r = self.semi_axes().unwrap()[0];
                (x.norm_squared() - r * r) / (2.0 * r)
            }
        }
    }

    pub fn level_gradient(&self, x: &Vec3) -> Vec3 {
        match *self {
            SurfaceGeometry::FlatWall { orientation, .. } => Vec3::new(0.0, 0.0, f64::from(orientation)),
            SurfaceGeometry::Ellipsoid { a, b, c } => Vec3::new(x.x / (a * a), x.y / (b * b), x.z / (c * c)),
            _ => x / self.semi_axes().unwrap()[0],
        }
    }

    pub fn level_hessian(&self, _x: &Vec3) -> Mat3 {
        match *self {
            SurfaceGeometry::FlatWall { .. } => Mat3::zeros(),
            SurfaceGeometry::Ellipsoid { a, b, c } => {
                Mat3::from_diagonal(&Vec3::new(1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c)))
            }
            _ => Mat3::identity() / self.semi_axes().unwrap()[0],
        }
    }

    pub fn check_on_surface(&self, x: &Vec3) -> Result<()> {
        let level = self.level(x);
        if level.abs() < ON_SURFACE_TOL {
            Ok(())
        } else {
            Err(Error::PointOffSurface { point: [x.x, x.y, x.z], level })
        }
    }

    /// Unit gradient field; defined wherever `grad phi != 0`.
    pub fn normal_extended(&self, x: &Vec3) -> Vec3 {
        self.level_gradient(x).normalize()
    }

    /// Derivative of the extended normal: `(grad n)_{ij} = d n_i / d x_j`.
    pub fn normal_jacobian(&self, x: &Vec3) -> Mat3 {
        let g = self.level_gradient(x);
        let len = g.norm();
        let n = g / len;
        let proj = Mat3::identity() - n * n.transpose();
        proj * self.level_hessian(x) / len
    }

    /// Shape operator of the unit-gradient extension, valid in a collar of
    /// the surface: `-(v . grad) n`.
    pub fn shape_operator_extended(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        -(self.normal_jacobian(x) * v)
    }

    /// Parameterisation point and area element for the closed surfaces,
    /// in terms of `mu = cos(theta)` and the azimuth.
    fn closed_param(&self, mu: f64, azimuth: f64) -> (Vec3, f64) {
        let [a, b, c] = self.semi_axes().expect("closed surface");
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        let (sp, cp) = azimuth.sin_cos();
        let x = Vec3::new(a * s * cp, b * s * sp, c * mu);
        let da = ((b * c * s * cp).powi(2) + (a * c * s * sp).powi(2) + (a * b * mu).powi(2)).sqrt();
        (x, da)
    }
}

/// Outward unit normal at a surface point.
pub fn normal(surface: &SurfaceGeometry, x: &Vec3) -> Result<Vec3> {
    surface.check_on_surface(x)?;
    Ok(surface.normal_extended(x))
}

/// `S(v) = -(v . grad) n` for a tangent vector `v`.
pub fn shape_operator(surface: &SurfaceGeometry, x: &Vec3, v: &Vec3) -> Result<Vec3> {
    let n = normal(surface, x)?;
    let vn = v.dot(&n);
    if vn.abs() > TANGENT_TOL {
        return Err(Error::NotTangent { normal_component: vn.abs() });
    }
    Ok(surface.shape_operator_extended(x, v))
}

/// Second fundamental form `II(v, w) = S(v) . w`.
pub fn second_fundamental_form(surface: &SurfaceGeometry, x: &Vec3, v: &Vec3, w: &Vec3) -> Result<f64> {
    Ok(shape_operator(surface, x, v)?.dot(w))
}

/// Gauss and mean curvature. `mean` is the trace of the shape operator
/// (so the unit sphere has `mean = -2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curvatures {
    pub gauss: f64,
    pub mean: f64,
}

pub fn curvatures(surface: &SurfaceGeometry, x: &Vec3) -> Result<Curvatures> {
    let frame = TangentFrame::at(surface, x)?;
    let m = frame.shape_matrix(surface);
    Ok(Curvatures { gauss: m.determinant(), mean: m.trace() })
}

/// Orthonormal frame `(e1, e2, n)` at a boundary point with `e1 x e2 = n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub point: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub n: Vec3,
}

impl TangentFrame {
    /// Frame at a surface point. `e1` is the normalised tangential part of
    /// the Cartesian axis least aligned with `n` (lowest index on ties).
    pub fn at(surface: &SurfaceGeometry, x: &Vec3) -> Result<Self> {
        let n = normal(surface, x)?;
        Ok(Self::from_normal(*x, n))
    }

    pub fn from_normal(point: Vec3, n: Vec3) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if n[i].abs() < n[best].abs() {
                best = i;
            }
        }
        let axis = Vec3::ith(best, 1.0);
        let e1 = (axis - n * n.dot(&axis)).normalize();
        let e2 = n.cross(&e1);
        TangentFrame { point, e1, e2, n }
    }

    /// Frame from explicit vectors; used in tests and for display.
    pub fn new(point: Vec3, e1: Vec3, e2: Vec3, n: Vec3) -> Self {
        TangentFrame { point, e1, e2, n }
    }

    /// Matrix of the shape operator in `(e1, e2)`.
    pub fn shape_matrix(&self, surface: &SurfaceGeometry) -> Matrix2<f64> {
        let s1 = surface.shape_operator_extended(&self.point, &self.e1);
        let s2 = surface.shape_operator_extended(&self.point, &self.e2);
        Matrix2::new(self.e1.dot(&s1), self.e1.dot(&s2), self.e2.dot(&s1), self.e2.dot(&s2))
    }

    /// In-plane coordinates of a tangent vector.
    pub fn coords(&self, v: &Vec3) -> [f64; 2] {
        [v.dot(&self.e1), v.dot(&self.e2)]
    }
}

/// `pi(V) = V - (V . n) n`.
pub fn tangential_project(n: &Vec3, v: &Vec3) -> Vec3 {
    v - n * n.dot(v)
}

/// `R V = n x V`; in frame coordinates `(v1, v2) -> (-v2, v1)`.
pub fn rotate_tangent(frame: &TangentFrame, v: &Vec3) -> Result<Vec3> {
    let vn = v.dot(&frame.n);
    if vn.abs() > TANGENT_TOL {
        return Err(Error::NotTangent { normal_component: vn.abs() });
    }
    Ok(frame.n.cross(v))
}

/// A boundary sample: position, outward normal and quadrature weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceNode {
    pub x: Vec3,
    pub n: Vec3,
    pub weight: f64,
}

/// Node counts of a surface rule. For closed surfaces `n1` Gauss–Legendre
/// nodes in `cos(theta)` and `n2` trapezoid nodes in azimuth; for flat walls
/// an `n1 x n2` tensor Gauss rule on `patch = [x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRuleSpec {
    pub n1: usize,
    pub n2: usize,
    pub patch: [f64; 4],
}

impl SurfaceRuleSpec {
    pub fn new(n1: usize, n2: usize) -> Self {
        SurfaceRuleSpec { n1, n2, patch: [0.0, 2.0 * PI, 0.0, 2.0 * PI] }
    }

    pub fn with_patch(mut self, patch: [f64; 4]) -> Self {
        self.patch = patch;
        self
    }
}

impl Default for SurfaceRuleSpec {
    fn default() -> Self {
        SurfaceRuleSpec::new(64, 128)
    }
}

/// Quadrature nodes of a surface; these double as the default boundary
/// sample set.
pub fn surface_rule(surface: &SurfaceGeometry, spec: &SurfaceRuleSpec) -> Vec<SurfaceNode> {
    match *surface {
        SurfaceGeometry::FlatWall { z0, orientation } => {
            let [x0, x1, y0, y1] = spec.patch;
            let gx = gauss_legendre(spec.n1).mapped(x0, x1);
            let gy = gauss_legendre(spec.n2).mapped(y0, y1);
            let n = Vec3::new(0.0, 0.0, f64::from(orientation));
            let mut out = Vec::with_capacity(gx.len() * gy.len());
            for (&x, &wx) in gx.nodes.iter().zip(&gx.weights) {
                for (&y, &wy) in gy.nodes.iter().zip(&gy.weights) {
                    out.push(SurfaceNode { x: Vec3::new(x, y, z0), n, weight: wx * wy });
                }
            }
            out
        }
        _ => {
            let gmu = gauss_legendre(spec.n1);
            let gphi = trapezoid_periodic(spec.n2, 0.0, 2.0 * PI);
            let mut out = Vec::with_capacity(gmu.len() * gphi.len());
            for (&mu, &wmu) in gmu.nodes.iter().zip(&gmu.weights) {
                for (&phi, &wphi) in gphi.nodes.iter().zip(&gphi.weights) {
                    let (x, da) = surface.closed_param(mu, phi);
                    let n = surface.normal_extended(&x);
                    out.push(SurfaceNode { x, n, weight: wmu * wphi * da });
                }
            }
            out
        }
    }
}

/// Surface integral of a scalar function of (point, normal).
pub fn surface_quadrature(
    surface: &SurfaceGeometry,
    spec: &SurfaceRuleSpec,
    f: impl Fn(&Vec3, &Vec3) -> f64,
) -> f64 {
    surface_rule(surface, spec).iter().map(|node| node.weight * f(&node.x, &node.n)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn normals_of_catalog_surfaces() {
        let n = normal(&SurfaceGeometry::UnitSphere, &unit(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(n, unit(0.0, 0.0, 1.0));
        let n = normal(&SurfaceGeometry::ellipsoid(2.0, 1.0, 1.0), &unit(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(n, unit(1.0, 0.0, 0.0));
        let n = normal(&SurfaceGeometry::flat_wall(1.0, 1), &unit(0.3, -2.0, 1.0)).unwrap();
        assert_eq!(n, unit(0.0, 0.0, 1.0));
    }

    #[test]
    fn off_surface_point_is_rejected() {
        let err = normal(&SurfaceGeometry::UnitSphere, &unit(0.0, 0.0, 1.1)).unwrap_err();
        assert!(matches!(err, Error::PointOffSurface { .. }));
    }

    #[test]
    fn shape_operator_examples() {
        let s = shape_operator(&SurfaceGeometry::UnitSphere, &unit(1.0, 0.0, 0.0), &unit(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(s, unit(0.0, -1.0, 0.0), epsilon = 1e-15);
        let s = shape_operator(&SurfaceGeometry::flat_wall(0.0, 1), &unit(3.0, 1.0, 0.0), &unit(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(s, Vec3::zeros());
        let s = shape_operator(&SurfaceGeometry::ellipsoid(2.0, 1.0, 1.0), &unit(2.0, 0.0, 0.0), &unit(0.0, 1.0, 0.0))
            .unwrap();
        assert_relative_eq!(s, unit(0.0, -2.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn shape_operator_rejects_normal_direction() {
        let err = shape_operator(&SurfaceGeometry::UnitSphere, &unit(1.0, 0.0, 0.0), &unit(1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NotTangent { .. }));
    }

    #[test]
    fn curvature_examples() {
        let c = curvatures(&SurfaceGeometry::UnitSphere, &unit(0.6, 0.0, 0.8)).unwrap();
        assert_relative_eq!(c.gauss, 1.0, epsilon = 1e-14);
        assert_relative_eq!(c.mean, -2.0, epsilon = 1e-14);
        let c = curvatures(&SurfaceGeometry::flat_wall(-1.0, -1), &unit(0.2, 0.1, -1.0)).unwrap();
        assert_eq!((c.gauss, c.mean), (0.0, 0.0));
        let c = curvatures(&SurfaceGeometry::ellipsoid(2.0, 1.0, 1.0), &unit(2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(c.gauss, 4.0, epsilon = 1e-14);
        let c = curvatures(&SurfaceGeometry::sphere(2.0), &unit(0.0, 2.0, 0.0)).unwrap();
        assert_relative_eq!(c.gauss, 0.25, epsilon = 1e-14);
        assert_relative_eq!(c.mean, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn projection_and_rotation_examples() {
        let n = unit(0.0, 0.0, 1.0);
        assert_eq!(tangential_project(&n, &unit(1.0, 2.0, 3.0)), unit(1.0, 2.0, 0.0));
        assert_eq!(tangential_project(&n, &n), Vec3::zeros());
        let v = unit(0.5, -0.25, 0.0);
        assert_eq!(tangential_project(&n, &v), v);

        let frame = TangentFrame::new(Vec3::zeros(), unit(1.0, 0.0, 0.0), unit(0.0, 1.0, 0.0), n);
        assert_eq!(rotate_tangent(&frame, &frame.e1).unwrap(), frame.e2);
        let rv = rotate_tangent(&frame, &v).unwrap();
        assert_eq!(rotate_tangent(&frame, &rv).unwrap(), -v);
        assert_eq!(frame.coords(&rv), [0.25, 0.5]);

        let sphere_frame = TangentFrame::at(&SurfaceGeometry::UnitSphere, &unit(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(rotate_tangent(&sphere_frame, &unit(0.0, 1.0, 0.0)).unwrap(), unit(0.0, 0.0, 1.0));
        assert!(rotate_tangent(&sphere_frame, &unit(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn frame_tie_breaking_picks_lowest_axis() {
        // n = e_z: x and y tie, x wins
        let f = TangentFrame::from_normal(Vec3::zeros(), unit(0.0, 0.0, 1.0));
        assert_eq!(f.e1, unit(1.0, 0.0, 0.0));
        assert_eq!(f.e2, unit(0.0, 1.0, 0.0));
    }

    #[test]
    fn surface_quadrature_examples() {
        let spec = SurfaceRuleSpec::new(64, 128);
        let area = surface_quadrature(&SurfaceGeometry::UnitSphere, &spec, |_, _| 1.0);
        assert_relative_eq!(area, 4.0 * PI, max_relative = 1e-12);
        // sin^2(theta) = x^2 + y^2 on the unit sphere
        let s2 = surface_quadrature(&SurfaceGeometry::UnitSphere, &spec, |x, _| x.x * x.x + x.y * x.y);
        assert_relative_eq!(s2, 8.0 * PI / 3.0, max_relative = 1e-12);
        let wall = surface_quadrature(&SurfaceGeometry::flat_wall(1.0, 1), &SurfaceRuleSpec::new(8, 8), |_, _| 1.0);
        assert_relative_eq!(wall, 4.0 * PI * PI, max_relative = 1e-13);
    }

    #[test]
    fn ellipsoid_area_matches_reference() {
        // prolate spheroid a = 2 along x, b = c = 1:
        // A = 2 pi b^2 (1 + a/(b e) asin e), e = sqrt(1 - b^2/a^2)
        let e: f64 = (1.0 - 0.25f64).sqrt();
        let exact = 2.0 * PI * (1.0 + 2.0 / e * e.asin());
        let spec = SurfaceRuleSpec::new(64, 128);
        let area = surface_quadrature(&SurfaceGeometry::ellipsoid(2.0, 1.0, 1.0), &spec, |_, _| 1.0);
        assert_relative_eq!(area, exact, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_converges_spectrally() {
        // three smooth integrands on the ellipsoid; compare n against 2n
        let surface = SurfaceGeometry::ellipsoid(1.5, 1.0, 0.75);
        let integrands: [&dyn Fn(&Vec3, &Vec3) -> f64; 3] = [
            &|x, _| x.x.powi(4) * x.y.powi(2),
            &|x, _| (x.z).exp(),
            &|x, n| n.x * x.x + (x.y * x.z).cos(),
        ];
        for f in integrands {
            let reference = surface_quadrature(&surface, &SurfaceRuleSpec::new(96, 192), f);
            let coarse = (surface_quadrature(&surface, &SurfaceRuleSpec::new(8, 16), f) - reference).abs();
            let fine = (surface_quadrature(&surface, &SurfaceRuleSpec::new(16, 32), f) - reference).abs();
            assert!(fine <= (coarse * 1e-3).max(1e-13), "coarse {coarse:e} fine {fine:e}");
        }
    }
}
