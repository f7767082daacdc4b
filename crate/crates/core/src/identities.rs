//! Integral identities and the persistence (Lie bracket) criterion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::boundary::{classical_vector, sample_points};
use crate::error::{Error, Result};
use crate::field::domain::{integrate_squares, multi_indices, multinomial};
use crate::field::{AnalyticField, Domain, Expr};
use crate::geometry::{curvatures, SurfaceGeometry, SurfaceNode, SurfaceRuleSpec, Vec3};

/// Floor used in relative residuals.
pub const REL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub resolution: String,
    /// Named intermediate quantities (individual terms, ratios).
    pub terms: BTreeMap<String, f64>,
}

impl IdentityReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, resolution: impl Into<String>) -> Self {
        let abs_residual = (lhs - rhs).abs();
        IdentityReport {
            name: name.into(),
            lhs,
            rhs,
            abs_residual,
            rel_residual: abs_residual / lhs.abs().max(rhs.abs()).max(REL_FLOOR),
            resolution: resolution.into(),
            terms: BTreeMap::new(),
        }
    }

    pub fn with_term(mut self, key: &str, value: f64) -> Self {
        self.terms.insert(key.to_string(), value);
        self
    }

    pub fn term(&self, key: &str) -> Option<f64> {
        self.terms.get(key).copied()
    }
}

/// Node counts for volume and boundary quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub volume: usize,
    pub surface: (usize, usize),
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { volume: 48, surface: (64, 128) }
    }
}

impl Resolution {
    pub fn doubled(&self) -> Self {
        Resolution { volume: 2 * self.volume, surface: (2 * self.surface.0, 2 * self.surface.1) }
    }

    fn describe(&self, domain: &Domain) -> String {
        let n = self.volume;
        format!("{n}^3 volume, {}x{} surface ({domain:?})", self.surface.0, self.surface.1)
    }
}

fn boundary_nodes(domain: &Domain, res: &Resolution) -> Vec<(SurfaceGeometry, SurfaceNode)> {
    let spec = match *domain {
        Domain::Channel { lx, ly } => SurfaceRuleSpec::new(res.surface.0, res.surface.1).with_patch([0.0, lx, 0.0, ly]),
        _ => SurfaceRuleSpec::new(res.surface.0, res.surface.1),
    };
    domain
        .boundary()
        .into_iter()
        .flat_map(|s| crate::geometry::surface_rule(&s, &spec).into_iter().map(move |n| (s, n)))
        .collect()
}

/// Sample points used for precondition checks (coarser than the
/// integration rules).
fn check_points(domain: &Domain) -> (Vec<Vec3>, Vec<(SurfaceGeometry, Vec3)>) {
    let interior: Vec<Vec3> = domain.volume_rule(6).into_iter().map(|(x, _)| x).collect();
    let spec = match *domain {
        Domain::Channel { lx, ly } => SurfaceRuleSpec::new(12, 24).with_patch([0.0, lx, 0.0, ly]),
        _ => SurfaceRuleSpec::new(12, 24),
    };
    let boundary = domain
        .boundary()
        .into_iter()
        .flat_map(|s| sample_points(&s, &spec).into_iter().map(move |x| (s, x)))
        .collect();
    (interior, boundary)
}

fn solenoidal_tangent_problems(u: &AnalyticField, domain: &Domain) -> Vec<String> {
    let (interior, boundary) = check_points(domain);
    let mut problems = Vec::new();
    let div = u.divergence();
    let scale = 1.0
        + interior
            .iter()
            .map(|x| u.jacobian(x).norm() + u.value(x).norm())
            .fold(0.0, f64::max);
    let max_div = interior
        .iter()
        .chain(boundary.iter().map(|(_, x)| x))
        .map(|x| div.eval(x).abs())
        .fold(0.0, f64::max);
    if max_div >= 1e-10 * scale {
        problems.push(format!("{}: divergence {max_div:e}", u.label));
    }
    let max_normal = boundary
        .iter()
        .map(|(s, x)| u.value(x).dot(&s.normal_extended(x)).abs())
        .fold(0.0, f64::max);
    if max_normal >= 1e-10 * scale {
        problems.push(format!("{}: |u.n| = {max_normal:e} on the boundary", u.label));
    }
    problems
}

/// Check `||grad u||^2 = ||curl u||^2 + int_boundary II(u, u)` for a
/// divergence-free field tangent to the boundary.
pub fn divcurl_base_check(u: &AnalyticField, domain: &Domain, res: &Resolution) -> Result<IdentityReport> {
    let problems = solenoidal_tangent_problems(u, domain);
    if !problems.is_empty() {
        return Err(Error::PreconditionViolated(problems));
    }
    let rule = domain.volume_rule(res.volume);
    let grad: Vec<Expr> = u.gradient().into_iter().flatten().collect();
    let grad_sq = integrate_squares(&grad, &rule);
    let curl_sq = integrate_squares(u.curl().components(), &rule);
    let boundary: f64 = boundary_nodes(domain, res)
        .iter()
        .map(|(s, node)| {
            let v = u.value(&node.x);
            node.weight * s.shape_operator_extended(&node.x, &v).dot(&v)
        })
        .sum();
    Ok(IdentityReport::new("divcurl_base", grad_sq, curl_sq + boundary, res.describe(domain))
        .with_term("grad_sq", grad_sq)
        .with_term("curl_sq", curl_sq)
        .with_term("boundary_II", boundary))
}

/// `rho = ||grad^{r+1} u||^2 / sum_{l <= r+1} ||curl^l u||^2`, with the full
/// tensor norm on top (every ordered index tuple). When `zeta` is given the
/// Navier condition is required on the boundary as well.
pub fn divcurl_ratio(
    u: &AnalyticField,
    domain: &Domain,
    r: usize,
    zeta: Option<f64>,
    res: &Resolution,
) -> Result<IdentityReport> {
    let mut problems = solenoidal_tangent_problems(u, domain);
    if let Some(zeta) = zeta {
        if zeta <= 0.0 {
            return Err(Error::NonpositiveSlipLength(zeta));
        }
        let (_, boundary) = check_points(domain);
        let mut worst: f64 = 0.0;
        for (s, x) in &boundary {
            worst = worst.max(classical_vector(u, s, zeta, x)?.norm());
        }
        if worst >= 1e-8 {
            problems.push(format!("{}: Navier residual {worst:e} at zeta = {zeta}", u.label));
        }
    }
    if !problems.is_empty() {
        return Err(Error::PreconditionViolated(problems));
    }
    let rule = domain.volume_rule(res.volume);
    let top: f64 = multi_indices(r + 1)
        .into_iter()
        .map(|alpha| {
            let exprs: Vec<Expr> = (0..3).map(|i| u.derivative_expr(i, alpha)).collect();
            multinomial(alpha) * integrate_squares(&exprs, &rule)
        })
        .sum();
    let mut bottom = 0.0;
    let mut q = u.clone();
    let mut report_terms = Vec::new();
    for l in 0..=r + 1 {
        let v = integrate_squares(q.components(), &rule);
        report_terms.push((format!("curl{l}_sq"), v));
        bottom += v;
        if l <= r {
            q = q.curl();
        }
    }
    let rho = if top == 0.0 && bottom == 0.0 { 0.0 } else { top / bottom };
    let mut rep = IdentityReport::new(format!("divcurl_ratio_r{r}"), top, bottom, res.describe(domain))
        .with_term("rho", rho)
        .with_term("grad_r1_sq", top);
    for (k, v) in report_terms {
        rep = rep.with_term(&k, v);
    }
    Ok(rep)
}

/// Fields used by the CLI and the corpus-level checks. With `zeta` the
/// fields also satisfy the Navier condition on the boundary; without it
/// they are solenoidal and tangent.
pub fn identity_corpus(domain: &Domain, zeta: Option<f64>) -> Vec<AnalyticField> {
    use crate::field::analytic::{channel_robin_mode, rigid_rotation, sheared_robin, solenoidal_poly, taylor_green, toroidal_navier, Tangency};
    let z = Vec3::new(0.0, 0.0, 1.0);
    let x = Vec3::new(1.0, 0.0, 0.0);
    match (*domain, zeta) {
        (Domain::Ball { radius }, Some(zeta)) => (1..=3)
            .flat_map(|k| [toroidal_navier(z, radius, zeta, k), toroidal_navier(x, radius, zeta, k)])
            .collect(),
        (Domain::Ball { radius }, None) => {
            let sphere = SurfaceGeometry::sphere(radius);
            let mut c = vec![rigid_rotation(z)];
            c.extend((1..=5).map(|seed| solenoidal_poly(seed, 4, Tangency::Surface(sphere))));
            c
        }
        (Domain::Channel { .. }, zeta) => {
            let zeta = zeta.unwrap_or(1.0);
            vec![channel_robin_mode(zeta), sheared_robin(zeta, 1, 1, 2, 0.5), sheared_robin(zeta, 2, 2, 2, 1.0)]
        }
        (Domain::PeriodicBox { .. }, _) => vec![taylor_green()],
    }
}

/// Advection decomposition `u.grad u = grad(|u|^2)/2 - u x w` and the curl
/// integration by parts
/// `int <V, curl W> = int_boundary <W x V, n> + int <curl V, W>`.
pub fn vector_identity_checks(
    u: &AnalyticField,
    w: &AnalyticField,
    domain: &Domain,
    res: &Resolution,
) -> Vec<IdentityReport> {
    let rule = domain.volume_rule(res.volume);
    let desc = res.describe(domain);

    let adv = advection_expr(u);
    let alt = lamb_form_expr(u);
    let diff: Vec<Expr> = (0..3).map(|i| &adv[i] - &alt[i]).collect();
    let lhs = integrate_squares(&adv, &rule);
    let rhs = integrate_squares(&alt, &rule);
    let mut advection = IdentityReport::new("advection_decomposition", lhs, rhs, desc.clone());
    advection.abs_residual = integrate_squares(&diff, &rule).sqrt();
    advection.rel_residual = advection.abs_residual / lhs.sqrt().max(rhs.sqrt()).max(REL_FLOOR);

    let curl_w = w.curl();
    let curl_v = u.curl();
    let dot = |a: &AnalyticField, b: &AnalyticField, x: &Vec3| a.value(x).dot(&b.value(x));
    let vol_lhs: f64 = rule.iter().map(|(x, wt)| wt * dot(u, &curl_w, x)).sum();
    let vol_rhs: f64 = rule.iter().map(|(x, wt)| wt * dot(&curl_v, w, x)).sum();
    let bdry: f64 = boundary_nodes(domain, res)
        .iter()
        .map(|(_, node)| node.weight * w.value(&node.x).cross(&u.value(&node.x)).dot(&node.n))
        .sum();
    let parts = IdentityReport::new("curl_integration_by_parts", vol_lhs, bdry + vol_rhs, desc)
        .with_term("boundary", bdry)
        .with_term("volume_curl_v_w", vol_rhs);
    vec![advection, parts]
}

/// `(u . grad) u` as expressions.
pub fn advection_expr(u: &AnalyticField) -> Vec<Expr> {
    let g = u.gradient();
    (0..3)
        .map(|i| {
            (0..3).fold(Expr::zero(), |acc, j| &acc + &(u.component(j) * &g[i][j]))
        })
        .collect()
}

/// `grad(|u|^2)/2 - u x curl u` as expressions.
pub fn lamb_form_expr(u: &AnalyticField) -> Vec<Expr> {
    let c = u.components();
    let half_sq = (0..3).fold(Expr::zero(), |acc, i| &acc + &(&c[i] * &c[i])).scale(0.5);
    let w = u.curl();
    let o = w.components();
    let cross = [
        &(&c[1] * &o[2]) - &(&c[2] * &o[1]),
        &(&c[2] * &o[0]) - &(&c[0] * &o[2]),
        &(&c[0] * &o[1]) - &(&c[1] * &o[0]),
    ];
    (0..3).map(|i| &half_sq.diff(i) - &cross[i]).collect()
}

/// `(u . grad) w - (w . grad) u` at `x`.
pub fn lie_bracket(u: &AnalyticField, w: &AnalyticField, x: &Vec3) -> Vec3 {
    w.jacobian(x) * u.value(x) - u.jacobian(x) * w.value(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    PredictsFailure,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub div_u0: f64,
    pub u0_dot_n: f64,
    pub omega0_cross_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceVerdict {
    pub admissibility: Admissibility,
    pub bracket: [f64; 3],
    pub bracket_cross_n_norm: f64,
    pub gauss_curvature_at_x0: f64,
    pub vorticity_norm_at_x0: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Tolerance on `|b x n|` above which a nonzero bracket is declared.
pub const BRACKET_TOL: f64 = 1e-10;

/// The boundary condition `w x n = 0` cannot persist from `(u0, w0)` when
/// `((u0 . grad) w0 - (w0 . grad) u0) x n != 0` at a point of nonzero Gauss
/// curvature where `w0 != 0`.
pub fn persistence_check(
    u0: &AnalyticField,
    omega0: &AnalyticField,
    surface: &SurfaceGeometry,
    x0: &Vec3,
) -> Result<PersistenceVerdict> {
    surface.check_on_surface(x0)?;
    let n = surface.normal_extended(x0);
    let b = lie_bracket(u0, omega0, x0);
    let bxn = b.cross(&n).norm();
    let k = curvatures(surface, x0)?.gauss;
    let vort = omega0.value(x0).norm();

    let spec = match surface {
        SurfaceGeometry::FlatWall { .. } => SurfaceRuleSpec::new(12, 12),
        _ => SurfaceRuleSpec::new(16, 32),
    };
    let samples = sample_points(surface, &spec);
    let div = u0.divergence();
    let mut adm = Admissibility { div_u0: 0.0, u0_dot_n: 0.0, omega0_cross_n: 0.0 };
    for x in samples.iter().chain(std::iter::once(x0)) {
        let nx = surface.normal_extended(x);
        adm.div_u0 = adm.div_u0.max(div.eval(x).abs());
        adm.u0_dot_n = adm.u0_dot_n.max(u0.value(x).dot(&nx).abs());
        adm.omega0_cross_n = adm.omega0_cross_n.max(omega0.value(x).cross(&nx).norm());
    }
    let verdict = if bxn > BRACKET_TOL && k.abs() > 1e-12 && vort > 0.0 {
        Verdict::PredictsFailure
    } else {
        Verdict::Inconclusive
    };
    Ok(PersistenceVerdict {
        admissibility: adm,
        bracket: [b.x, b.y, b.z],
        bracket_cross_n_norm: bxn,
        gauss_curvature_at_x0: k,
        vorticity_norm_at_x0: vort,
        tolerance: BRACKET_TOL,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::analytic::{channel_robin_mode, random_analytic, rigid_rotation, solenoidal_poly, Tangency};
    use crate::field::{catalog_field, CatalogParams};
    use std::f64::consts::PI;

    fn ez() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    fn coarse() -> Resolution {
        Resolution { volume: 16, surface: (24, 48) }
    }

    #[test]
    fn rigid_rotation_base_identity() {
        let u = rigid_rotation(ez());
        let rep = divcurl_base_check(&u, &Domain::unit_ball(), &coarse()).unwrap();
        assert!((rep.term("grad_sq").unwrap() - 8.0 * PI / 3.0).abs() < 1e-12);
        assert!((rep.term("curl_sq").unwrap() - 16.0 * PI / 3.0).abs() < 1e-12);
        assert!((rep.term("boundary_II").unwrap() + 8.0 * PI / 3.0).abs() < 1e-12);
        assert!(rep.rel_residual < 1e-12);
    }

    #[test]
    fn zero_field_identities() {
        let z = AnalyticField::zero();
        let rep = divcurl_base_check(&z, &Domain::unit_ball(), &coarse()).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
        let ratio = divcurl_ratio(&z, &Domain::unit_ball(), 1, None, &coarse()).unwrap();
        assert_eq!(ratio.term("rho"), Some(0.0));
    }

    #[test]
    fn tangent_polynomial_fields_satisfy_base_identity() {
        for seed in 1..=2 {
            let u = solenoidal_poly(seed, 3, Tangency::Surface(SurfaceGeometry::UnitSphere));
            let rep = divcurl_base_check(&u, &Domain::unit_ball(), &coarse()).unwrap();
            assert!(rep.rel_residual < 1e-10, "seed {seed}: {}", rep.rel_residual);
        }
    }

    #[test]
    fn base_check_rejects_non_tangent() {
        let u = catalog_field("radial", &CatalogParams::default()).unwrap();
        let err = divcurl_base_check(&u, &Domain::unit_ball(), &coarse()).unwrap_err();
        match err {
            Error::PreconditionViolated(list) => assert_eq!(list.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rigid_rotation_ratio_r0() {
        let rep = divcurl_ratio(&rigid_rotation(ez()), &Domain::unit_ball(), 0, None, &coarse()).unwrap();
        assert!((rep.term("curl0_sq").unwrap() - 8.0 * PI / 15.0).abs() < 1e-12);
        assert!((rep.term("rho").unwrap() - 5.0 / 11.0).abs() < 1e-12);
        assert!(divcurl_ratio(&rigid_rotation(ez()), &Domain::unit_ball(), 0, Some(1.0), &coarse()).is_err());
    }

    #[test]
    fn robin_mode_ratio_matches_closed_form() {
        let zeta = 1.0;
        let u = channel_robin_mode(zeta);
        let l = crate::field::analytic::robin_even_root(zeta);
        let rep = divcurl_ratio(&u, &Domain::channel_2pi(), 1, Some(zeta), &Resolution { volume: 24, surface: (8, 8) }).unwrap();
        let s2 = (2.0 * l).sin() / (2.0 * l);
        let (ic, is) = (1.0 + s2, 1.0 - s2);
        let expect = l.powi(4) * ic / (ic + l * l * is + l.powi(4) * ic);
        assert!((rep.term("rho").unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn advection_identity_for_rigid_rotation() {
        let u = rigid_rotation(ez());
        let x = Vec3::new(0.3, -0.7, 0.2);
        let a: Vec<f64> = advection_expr(&u).iter().map(|e| e.eval(&x)).collect();
        let b: Vec<f64> = lamb_form_expr(&u).iter().map(|e| e.eval(&x)).collect();
        assert_eq!(a, vec![-0.3, 0.7, 0.0]);
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-15));
    }

    #[test]
    fn curl_parts_on_periodic_box() {
        let v = AnalyticField::new("V", [Expr::sin(2, 1.0), Expr::zero(), Expr::zero()]);
        let w = AnalyticField::new("W", [Expr::zero(), Expr::zero(), Expr::cos(0, 1.0)]);
        let reps = vector_identity_checks(&v, &w, &Domain::box_2pi(), &Resolution { volume: 16, surface: (4, 4) });
        assert!(reps[0].abs_residual < 1e-12);
        assert_eq!(reps[1].term("boundary"), Some(0.0));
        assert!(reps[1].abs_residual < 1e-12);
        let same = vector_identity_checks(&v, &v, &Domain::unit_ball(), &coarse());
        assert!(same[1].term("boundary").unwrap().abs() < 1e-14);
        assert!(same[1].abs_residual < 1e-12);
    }

    #[test]
    fn curl_parts_on_ball_with_boundary_term() {
        let v = random_analytic(3);
        let w = random_analytic(4);
        let reps = vector_identity_checks(&v, &w, &Domain::unit_ball(), &Resolution { volume: 24, surface: (32, 64) });
        assert!(reps[1].rel_residual < 1e-10, "{:?}", reps[1]);
        assert!(reps[0].rel_residual < 1e-12);
    }

    #[test]
    fn persistence_examples() {
        let sphere = SurfaceGeometry::UnitSphere;
        let u0 = rigid_rotation(ez());
        let w0 = AnalyticField::constant(Vec3::new(0.0, 0.0, 2.0));
        let v = persistence_check(&u0, &w0, &sphere, &ez()).unwrap();
        assert_eq!(v.bracket, [0.0; 3]);
        assert_eq!(v.verdict, Verdict::Inconclusive);

        let shear = catalog_field("shear_z", &CatalogParams::default()).unwrap();
        let v = persistence_check(&u0, &shear, &sphere, &ez()).unwrap();
        assert_eq!(v.bracket, [0.0, -1.0, 0.0]);
        assert!((v.bracket_cross_n_norm - 1.0).abs() < 1e-12);
        assert!(v.admissibility.omega0_cross_n > 0.0);
        assert_eq!(v.verdict, Verdict::PredictsFailure);

        let v = persistence_check(&u0, &AnalyticField::zero(), &sphere, &ez()).unwrap();
        assert_eq!(v.vorticity_norm_at_x0, 0.0);
        assert_eq!(v.verdict, Verdict::Inconclusive);

        assert!(matches!(
            persistence_check(&u0, &shear, &sphere, &Vec3::new(0.0, 0.0, 0.9)),
            Err(Error::PointOffSurface { .. })
        ));
    }
}
