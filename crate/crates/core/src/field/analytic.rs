//! Analytic vector fields with exact derivatives, and the field catalog.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, SurfaceGeometry, Vec3};

/// A vector field given by three closed-form component expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    pub label: String,
    comps: [Expr; 3],
    jac: [[Expr; 3]; 3],
    /// Divergence-free by construction.
    pub solenoidal: bool,
}

impl AnalyticField {
    pub fn new(label: impl Into<String>, comps: [Expr; 3]) -> Self {
        let jac = [comps[0].gradient(), comps[1].gradient(), comps[2].gradient()];
        AnalyticField { label: label.into(), comps, jac, solenoidal: false }
    }

    pub fn zero() -> Self {
        let mut f = AnalyticField::new("zero", [Expr::zero(), Expr::zero(), Expr::zero()]);
        f.solenoidal = true;
        f
    }

    pub fn constant(v: Vec3) -> Self {
        let mut f = AnalyticField::new("uniform", [Expr::constant(v.x), Expr::constant(v.y), Expr::constant(v.z)]);
        f.solenoidal = true;
        f
    }

    pub fn marked_solenoidal(mut self) -> Self {
        self.solenoidal = true;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.comps
    }

    pub fn value(&self, x: &Vec3) -> Vec3 {
        Vec3::new(self.comps[0].eval(x), self.comps[1].eval(x), self.comps[2].eval(x))
    }

    /// `J[i][j] = d u_i / d x_j`.
    pub fn jacobian(&self, x: &Vec3) -> Mat3 {
        Mat3::from_fn(|i, j| self.jac[i][j].eval(x))
    }

    /// `H[i]` is the Hessian matrix of component `i`.
    pub fn hessian(&self, x: &Vec3) -> [Mat3; 3] {
        std::array::from_fn(|i| Mat3::from_fn(|j, k| self.jac[i][j].diff(k).eval(x)))
    }

    /// Expression for `d^alpha u_i`.
    pub fn derivative_expr(&self, i: usize, alpha: [usize; 3]) -> Expr {
        self.comps[i].diff_multi(alpha)
    }

    pub fn curl(&self) -> AnalyticField {
        let j = &self.jac;
        let comps = [&j[2][1] - &j[1][2], &j[0][2] - &j[2][0], &j[1][0] - &j[0][1]];
        AnalyticField::new(format!("curl({})", self.label), comps).marked_solenoidal()
    }

    /// `curl^r`; `r = 0` returns a copy of the field.
    pub fn iterated_curl(&self, r: usize) -> AnalyticField {
        let mut out = self.clone();
        for _ in 0..r {
            out = out.curl();
        }
        out
    }

    pub fn divergence(&self) -> Expr {
        &(&self.jac[0][0] + &self.jac[1][1]) + &self.jac[2][2]
    }

    /// Gradient tensor as expressions, `G[i][j] = d u_i / d x_j`.
    pub fn gradient(&self) -> [[Expr; 3]; 3] {
        self.jac.clone()
    }

    pub fn scale(&self, c: f64) -> AnalyticField {
        let mut f = AnalyticField::new(format!("{c}*{}", self.label), self.comps.clone().map(|e| e.scale(c)));
        f.solenoidal = self.solenoidal;
        f
    }

    pub fn add(&self, other: &AnalyticField) -> AnalyticField {
        let comps = std::array::from_fn(|i| &self.comps[i] + &other.comps[i]);
        let mut f = AnalyticField::new(format!("{}+{}", self.label, other.label), comps);
        f.solenoidal = self.solenoidal && other.solenoidal;
        f
    }

    /// Scalar multiple `g u` with a scalar expression `g`.
    pub fn times_scalar(&self, g: &Expr) -> AnalyticField {
        AnalyticField::new(self.label.clone(), std::array::from_fn(|i| g * &self.comps[i]))
    }
}

/// Vector calculus shared by the analytic and spectral representations.
pub trait VectorCalculus: Sized {
    type Scalar;
    type Tensor;

    fn curl(&self) -> Self;
    fn divergence(&self) -> Self::Scalar;
    fn gradient(&self) -> Self::Tensor;
    fn iterated_curl(&self, r: usize) -> Result<Self>;
}

impl VectorCalculus for AnalyticField {
    type Scalar = Expr;
    type Tensor = [[Expr; 3]; 3];

    fn curl(&self) -> Self {
        AnalyticField::curl(self)
    }

    fn divergence(&self) -> Expr {
        AnalyticField::divergence(self)
    }

    fn gradient(&self) -> [[Expr; 3]; 3] {
        AnalyticField::gradient(self)
    }

    fn iterated_curl(&self, r: usize) -> Result<Self> {
        Ok(AnalyticField::iterated_curl(self, r))
    }
}

/// Components of `a x (x, y, z)`.
fn cross_with_position(a: &Vec3) -> [Expr; 3] {
    let x = Expr::coord(0);
    let y = Expr::coord(1);
    let z = Expr::coord(2);
    [
        &z.scale(a.y) - &y.scale(a.z),
        &x.scale(a.z) - &z.scale(a.x),
        &y.scale(a.x) - &x.scale(a.y),
    ]
}

fn radius_squared() -> Expr {
    &(&Expr::monomial([2, 0, 0]) + &Expr::monomial([0, 2, 0])) + &Expr::monomial([0, 0, 2])
}

/// Curl of a vector potential given as three expressions.
fn curl_of(potential: [Expr; 3]) -> [Expr; 3] {
    let a = potential;
    [
        &a[2].diff(1) - &a[1].diff(2),
        &a[0].diff(2) - &a[2].diff(0),
        &a[1].diff(0) - &a[0].diff(1),
    ]
}

/// Level-set polynomial vanishing on a surface.
pub fn level_set_expr(surface: &SurfaceGeometry) -> Expr {
    match *surface {
        SurfaceGeometry::UnitSphere => &radius_squared() - &Expr::constant(1.0),
        SurfaceGeometry::Sphere { radius } => &radius_squared() - &Expr::constant(radius * radius),
        SurfaceGeometry::Ellipsoid { a, b, c } => {
            let e = &(&Expr::monomial([2, 0, 0]).scale(1.0 / (a * a)) + &Expr::monomial([0, 2, 0]).scale(1.0 / (b * b)))
                + &Expr::monomial([0, 0, 2]).scale(1.0 / (c * c));
            &e - &Expr::constant(1.0)
        }
        SurfaceGeometry::FlatWall { z0, .. } => &Expr::coord(2) - &Expr::constant(z0),
    }
}

/// Which boundary a catalog field is made tangent to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tangency {
    None,
    Surface(SurfaceGeometry),
    /// Both channel walls `z = +-1`.
    ChannelWalls,
}

impl Tangency {
    fn multiplier(&self) -> Option<Expr> {
        match self {
            Tangency::None => None,
            Tangency::Surface(s) => Some(level_set_expr(s)),
            Tangency::ChannelWalls => Some(&Expr::constant(1.0) - &Expr::monomial([0, 0, 2])),
        }
    }
}

fn random_polynomial(rng: &mut ChaCha8Rng, degree: u32) -> Expr {
    let mut e = Expr::zero();
    for total in 0..=degree {
        for i in 0..=total {
            for j in 0..=(total - i) {
                let k = total - i - j;
                let c: f64 = rng.random_range(-1.0..1.0);
                e = &e + &Expr::monomial([i, j, k]).scale(c);
            }
        }
    }
    e
}

/// Smallest positive root of `lambda tan(lambda) = 1/zeta` (the even Robin
/// eigenvalue of the slab `|z| <= 1`), by bisection on `(0, pi/2)`.
pub fn robin_even_root(zeta: f64) -> f64 {
    if zeta.is_infinite() {
        return 0.0;
    }
    let target = 1.0 / zeta;
    bisect(|l| l * l.tan() - target, 0.0, FRAC_PI_2 - 1e-15)
}

/// Smallest positive root of `tan(mu) = -mu zeta` (the odd Robin mode
/// `sin(mu z)`), in `(pi/2, pi)`.
pub fn robin_odd_root(zeta: f64) -> f64 {
    if zeta.is_infinite() {
        return FRAC_PI_2;
    }
    bisect(|m| m.sin() + m * zeta * m.cos(), FRAC_PI_2, std::f64::consts::PI)
}

/// n-th even Robin root (n = 0 is the first) in `(n pi, n pi + pi/2)`.
pub fn robin_even_root_n(zeta: f64, n: usize) -> f64 {
    let lo = n as f64 * std::f64::consts::PI;
    if zeta.is_infinite() {
        return lo;
    }
    if n == 0 {
        return robin_even_root(zeta);
    }
    bisect(|l| l * l.sin() - l.cos() / zeta, lo, lo + FRAC_PI_2)
}

/// n-th odd Robin root in `(n pi + pi/2, (n+1) pi)`.
pub fn robin_odd_root_n(zeta: f64, n: usize) -> f64 {
    let lo = n as f64 * std::f64::consts::PI + FRAC_PI_2;
    if zeta.is_infinite() {
        return lo;
    }
    bisect(|m| m.sin() + m * zeta * m.cos(), lo, lo + FRAC_PI_2)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `a x x`.
pub fn rigid_rotation(axis: Vec3) -> AnalyticField {
    AnalyticField::new("rigid_rotation", cross_with_position(&axis)).marked_solenoidal()
}

/// `curl(g A)` for a seeded random polynomial potential `A` of degree
/// `degree - 1`, where `g` vanishes on the tangency target (or `g = 1`).
/// The result is divergence-free, has polynomial degree `degree` (plus
/// the degree of `g`), and is tangent wherever `g = 0`.
pub fn solenoidal_poly(seed: u64, degree: u32, tangency: Tangency) -> AnalyticField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg_a = degree.saturating_sub(1);
    let mut potential: [Expr; 3] = std::array::from_fn(|_| random_polynomial(&mut rng, deg_a));
    if let Some(g) = tangency.multiplier() {
        potential = potential.map(|a| &g * &a);
    }
    AnalyticField::new(format!("solenoidal_poly(seed={seed},degree={degree})"), curl_of(potential))
        .marked_solenoidal()
}

/// Even Robin shear `(cos(lambda z), 0, 0)` with `lambda tan(lambda) = 1/zeta`.
pub fn channel_robin_mode(zeta: f64) -> AnalyticField {
    let lambda = robin_even_root(zeta);
    AnalyticField::new(
        format!("channel_robin_mode(lambda={lambda},zeta={zeta})"),
        [Expr::cos(2, lambda), Expr::zero(), Expr::zero()],
    )
    .marked_solenoidal()
}

/// Two-dimensional Taylor–Green vortex `(sin x cos y, -cos x sin y, 0)`.
pub fn taylor_green() -> AnalyticField {
    let u = &Expr::sin(0, 1.0) * &Expr::cos(1, 1.0);
    let v = -(&Expr::cos(0, 1.0) * &Expr::sin(1, 1.0));
    AnalyticField::new("taylor_green", [u, v, Expr::zero()]).marked_solenoidal()
}

/// `grad h`.
pub fn gradient_field(h: &Expr) -> AnalyticField {
    AnalyticField::new("gradient_field", h.gradient())
}

/// `(x, y, z)`.
pub fn radial() -> AnalyticField {
    AnalyticField::new("radial", [Expr::coord(0), Expr::coord(1), Expr::coord(2)])
}

/// `(z, 0, 0)`.
pub fn shear_z() -> AnalyticField {
    AnalyticField::new("shear_z", [Expr::coord(2), Expr::zero(), Expr::zero()]).marked_solenoidal()
}

/// Toroidal field `f (a x x)` with `f = 1 + c |x|^(2k)`, `c` chosen so
/// that `f + zeta df/dr = 0` at `|x| = R`, which is the Navier condition
/// on the sphere of radius `R`.
pub fn toroidal_navier(axis: Vec3, radius: f64, zeta: f64, extra_degree: u32) -> AnalyticField {
    let k = extra_degree.max(1);
    let rk = radius.powi(2 * k as i32);
    // 1 + c R^2k + zeta 2k c R^(2k-1) = 0
    let c = -1.0 / (rk + 2.0 * zeta * k as f64 * rk / radius);
    let mut s_pow = Expr::constant(1.0);
    for _ in 0..k {
        s_pow = &s_pow * &radius_squared();
    }
    let f = &Expr::constant(1.0) + &s_pow.scale(c);
    let base = cross_with_position(&axis);
    AnalyticField::new(
        format!("toroidal_navier(zeta={zeta},k={k})"),
        std::array::from_fn(|i| &f * &base[i]),
    )
    .marked_solenoidal()
}

/// Channel data `(F(y, z), G(z), 0)`: `F` is a seeded sum of Robin
/// eigenmodes in `z` times Fourier modes in `y`, `G = c (1 - z^2)^2`.
///
/// Both components satisfy the Navier (Robin) wall condition, and the
/// Euler evolution of this state is the exact shear-advected field
/// `(F(y - G(z) t, z), G(z), 0)`, which keeps satisfying it.
pub fn sheared_robin(zeta: f64, seed: u64, y_modes: usize, z_modes: usize, cross_flow: f64) -> AnalyticField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Expr::zero();
    for n in 1..=y_modes.max(1) {
        for m in 0..z_modes.max(1) {
            let (profile, wavenumber) = if m % 2 == 0 {
                let l = robin_even_root_n(zeta, m / 2);
                (Expr::cos(2, l), l)
            } else {
                let l = robin_odd_root_n(zeta, m / 2);
                (Expr::sin(2, l), l)
            };
            let amp: f64 = rng.random_range(0.5..1.0) / (1.0 + wavenumber * wavenumber + (n * n) as f64);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let ny = n as f64;
            // cos(n y + phase) = cos(phase) cos(n y) - sin(phase) sin(n y)
            let ydep = &Expr::cos(1, ny).scale(phase.cos()) - &Expr::sin(1, ny).scale(phase.sin());
            f = &f + &(&ydep * &profile).scale(amp);
        }
    }
    let one_minus_z2 = &Expr::constant(1.0) - &Expr::monomial([0, 0, 2]);
    let g = (&one_minus_z2 * &one_minus_z2).scale(cross_flow);
    AnalyticField::new(format!("sheared_robin(zeta={zeta},seed={seed})"), [f, g, Expr::zero()]).marked_solenoidal()
}

/// Seeded random field mixing polynomial and trigonometric terms; not
/// solenoidal in general. Used for bracket and identity property checks.
pub fn random_analytic(seed: u64) -> AnalyticField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = std::array::from_fn(|_| {
        let mut e = random_polynomial(&mut rng, 2);
        let axis = rng.random_range(0..3usize);
        let freq: f64 = rng.random_range(0.5..2.0);
        let amp: f64 = rng.random_range(-1.0..1.0);
        e = &e + &Expr::sin(axis, freq).scale(amp);
        let axis2 = rng.random_range(0..3usize);
        let rate: f64 = rng.random_range(-0.5..0.5);
        &e + &Expr::exp(axis2, rate).scale(rng.random_range(-1.0..1.0))
    });
    AnalyticField::new(format!("random_analytic(seed={seed})"), comps)
}

/// Parameters accepted by [`catalog_field`].
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogParams {
    pub axis: Vec3,
    pub seed: u64,
    pub degree: u32,
    pub zeta: f64,
    pub tangency: Tangency,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams {
            axis: Vec3::new(0.0, 0.0, 1.0),
            seed: 42,
            degree: 4,
            zeta: 1.0,
            tangency: Tangency::None,
        }
    }
}

/// Names understood by [`catalog_field`].
pub const CATALOG_NAMES: &[&str] = &[
    "rigid_rotation",
    "solenoidal_poly",
    "channel_robin_mode",
    "taylor_green",
    "gradient_field",
    "radial",
    "shear_z",
    "uniform",
    "zero",
    "toroidal_navier",
    "sheared_robin",
    "random_analytic",
];

pub fn catalog_field(name: &str, params: &CatalogParams) -> Result<AnalyticField> {
    let f = match name {
        "rigid_rotation" => rigid_rotation(params.axis),
        "solenoidal_poly" => solenoidal_poly(params.seed, params.degree, params.tangency),
        "channel_robin_mode" => channel_robin_mode(params.zeta),
        "taylor_green" => taylor_green(),
        "gradient_field" => gradient_field(&radius_squared().scale(0.5)),
        "radial" => radial(),
        "shear_z" => shear_z(),
        "uniform" => AnalyticField::constant(params.axis),
        "zero" => AnalyticField::zero(),
        "toroidal_navier" => toroidal_navier(params.axis, 1.0, params.zeta, params.degree.clamp(1, 3)),
        "sheared_robin" => sheared_robin(params.zeta, params.seed, 2, 3, 1.0),
        "random_analytic" => random_analytic(params.seed),
        other => return Err(Error::UnknownCatalogName(other.to_string())),
    };
    Ok(f)
}
