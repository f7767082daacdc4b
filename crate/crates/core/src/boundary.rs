//! Boundary conditions as residual functionals on boundary samples.
//!
//! Everything is evaluated in Cartesian components. With `pi` the
//! tangential projection, `R = n x .` and `S` the shape operator:
//!
//! * classical Navier: `c = pi(u) + 2 zeta pi(Du n)`
//! * geometric Navier: `g_sigma = pi(w) + (1/zeta) R pi(u) - 2 sigma R S(pi u)`
//! * slip type: `w x n`
//!
//! For a tangent field `pi(2 Du n) = 2 S(u) + w x n` and `w x n = -R pi(w)`,
//! so `(1/zeta) R c = g_sigma` exactly when `sigma = -1`
//! ([`SIGMA_STAR`]); [`equivalence_check`] confirms this numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::analytic::{
    channel_robin_mode, rigid_rotation, solenoidal_poly, toroidal_navier, AnalyticField, Tangency,
};
use crate::field::Expr;
use crate::geometry::{surface_rule, tangential_project, Mat3, SurfaceGeometry, SurfaceRuleSpec, Vec3};

/// Curvature-term sign for which the geometric and classical Navier
/// conditions coincide.
pub const SIGMA_STAR: i8 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Kinematic,
    NavierClassical,
    NavierGeometric,
    SlipType,
    IteratedNavier(usize),
    Commutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BCResidualReport {
    pub condition: Condition,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub samples: usize,
    pub sign_sigma: Option<i8>,
}

impl BCResidualReport {
    fn from_values(condition: Condition, values: &[f64], sign_sigma: Option<i8>) -> Self {
        let max_residual = values.iter().copied().fold(0.0, f64::max);
        let mean_residual = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        BCResidualReport { condition, max_residual, mean_residual, samples: values.len(), sign_sigma }
    }
}

/// The quadrature nodes of the default surface rule.
pub fn default_samples(surface: &SurfaceGeometry) -> Vec<Vec3> {
    sample_points(surface, &SurfaceRuleSpec::default())
}

pub fn sample_points(surface: &SurfaceGeometry, spec: &SurfaceRuleSpec) -> Vec<Vec3> {
    surface_rule(surface, spec).into_iter().map(|n| n.x).collect()
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveSlipLength(zeta))
    }
}

fn normal_at(surface: &SurfaceGeometry, x: &Vec3) -> Result<Vec3> {
    surface.check_on_surface(x)?;
    Ok(surface.normal_extended(x))
}

fn vorticity(j: &Mat3) -> Vec3 {
    Vec3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
}

/// Classical Navier residual vector at a surface point.
pub fn classical_vector(u: &AnalyticField, surface: &SurfaceGeometry, zeta: f64, x: &Vec3) -> Result<Vec3> {
    let n = normal_at(surface, x)?;
    let j = u.jacobian(x);
    let du = 0.5 * (j + j.transpose());
    Ok(tangential_project(&n, &u.value(x)) + 2.0 * zeta * tangential_project(&n, &(du * n)))
}

/// Geometric Navier residual vector `g_sigma` at a surface point.
pub fn geometric_vector(
    u: &AnalyticField,
    surface: &SurfaceGeometry,
    zeta: f64,
    sigma: i8,
    x: &Vec3,
) -> Result<Vec3> {
    let n = normal_at(surface, x)?;
    let j = u.jacobian(x);
    let w = vorticity(&j);
    let pu = tangential_project(&n, &u.value(x));
    let s_pu = surface.shape_operator_extended(x, &pu);
    Ok(tangential_project(&n, &w) + n.cross(&pu) / zeta - 2.0 * f64::from(sigma) * n.cross(&s_pu))
}

pub fn kinematic_residual(u: &AnalyticField, surface: &SurfaceGeometry, samples: &[Vec3]) -> Result<BCResidualReport> {
    let values = samples
        .iter()
        .map(|x| Ok(u.value(x).dot(&normal_at(surface, x)?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(BCResidualReport::from_values(Condition::Kinematic, &values, None))
}

pub fn navier_classical_residual(
    u: &AnalyticField,
    surface: &SurfaceGeometry,
    zeta: f64,
    samples: &[Vec3],
) -> Result<BCResidualReport> {
    check_zeta(zeta)?;
    let values = samples
        .iter()
        .map(|x| Ok(classical_vector(u, surface, zeta, x)?.norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(BCResidualReport::from_values(Condition::NavierClassical, &values, None))
}

pub fn navier_geometric_residual(
    u: &AnalyticField,
    surface: &SurfaceGeometry,
    zeta: f64,
    sigma: i8,
    samples: &[Vec3],
) -> Result<BCResidualReport> {
    check_zeta(zeta)?;
    let values = samples
        .iter()
        .map(|x| Ok(geometric_vector(u, surface, zeta, sigma, x)?.norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(BCResidualReport::from_values(Condition::NavierGeometric, &values, Some(sigma)))
}

pub fn slip_type_residual(u: &AnalyticField, surface: &SurfaceGeometry, samples: &[Vec3]) -> Result<BCResidualReport> {
    let values = samples
        .iter()
        .map(|x| {
            let n = normal_at(surface, x)?;
            Ok(vorticity(&u.jacobian(x)).cross(&n).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BCResidualReport::from_values(Condition::SlipType, &values, None))
}

/// Outcome of comparing `g_sigma` with `(1/zeta) R c` for both signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOutcome {
    /// The sign singled out by this corpus; `None` when both signs fit
    /// (flat walls, where the curvature term vanishes).
    pub sigma_star: Option<i8>,
    /// Signs whose relation holds within tolerance.
    pub consistent: Vec<i8>,
    /// Scaled maximum deviation for `sigma = +1` and `sigma = -1`.
    pub deviation_plus: f64,
    pub deviation_minus: f64,
    /// Unscaled maximum of `|g_sigma - (1/zeta) R c|` for the selected sign
    /// (or the smaller of the two).
    pub max_deviation: f64,
}

/// Tolerance on the scaled deviation `|g - R c / zeta| / (1 + |u| + |grad u|)`.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

pub fn equivalence_check(
    surface: &SurfaceGeometry,
    zeta: f64,
    corpus: &[AnalyticField],
    samples: &[Vec3],
) -> Result<EquivalenceOutcome> {
    check_zeta(zeta)?;
    let mut problems = Vec::new();
    for u in corpus {
        let k = kinematic_residual(u, surface, samples)?;
        if k.max_residual >= 1e-10 {
            problems.push(format!("{}: |u.n| = {:e} on {}", u.label, k.max_residual, surface.name()));
        }
    }
    if !problems.is_empty() {
        return Err(Error::PreconditionViolated(problems));
    }
    let mut scaled = [0.0f64; 2];
    let mut raw = [0.0f64; 2];
    for u in corpus {
        for x in samples {
            let n = surface.normal_extended(x);
            let c = classical_vector(u, surface, zeta, x)?;
            let target = n.cross(&c) / zeta;
            let scale = 1.0 + u.value(x).norm() + u.jacobian(x).norm();
            for (slot, sigma) in [1i8, -1].into_iter().enumerate() {
                let d = (geometric_vector(u, surface, zeta, sigma, x)? - target).norm();
                raw[slot] = raw[slot].max(d);
                scaled[slot] = scaled[slot].max(d / scale);
            }
        }
    }
    let consistent: Vec<i8> = [1i8, -1]
        .into_iter()
        .enumerate()
        .filter(|&(slot, _)| scaled[slot] < EQUIVALENCE_TOL)
        .map(|(_, s)| s)
        .collect();
    if consistent.is_empty() {
        return Err(Error::NoConsistentSign { plus: scaled[0], minus: scaled[1] });
    }
    let sigma_star = if consistent.len() == 1 { Some(consistent[0]) } else { None };
    let max_deviation = match sigma_star {
        Some(1) => raw[0],
        Some(_) => raw[1],
        None => raw[0].min(raw[1]),
    };
    Ok(EquivalenceOutcome { sigma_star, consistent, deviation_plus: scaled[0], deviation_minus: scaled[1], max_deviation })
}

/// Tangent fields used by [`equivalence_check`] when no corpus is given.
pub fn default_corpus(surface: &SurfaceGeometry, zeta: f64) -> Vec<AnalyticField> {
    let mut corpus = vec![AnalyticField::zero()];
    match *surface {
        SurfaceGeometry::FlatWall { z0, .. } => {
            let dz = &Expr::coord(2) - &Expr::constant(z0);
            // (f(z), 0, 0) with f = exp(-(z - z0) / zeta)
            let f = exp_profile(z0, zeta);
            corpus.push(AnalyticField::new("exp_profile", [f.clone(), Expr::zero(), Expr::zero()]));
            let g = &Expr::cos(2, 1.3) + &(&dz * &dz);
            corpus.push(AnalyticField::new(
                "sin_x_cos_y_profile",
                [&Expr::sin(0, 1.0) * &g, &Expr::cos(1, 1.0) * &f, Expr::zero()],
            ));
            for seed in 1..=3 {
                corpus.push(solenoidal_poly(seed, 3, Tangency::Surface(*surface)));
            }
            corpus.push(channel_robin_mode(zeta));
        }
        SurfaceGeometry::UnitSphere | SurfaceGeometry::Sphere { .. } => {
            let radius = surface.semi_axes().map(|a| a[0]).unwrap_or(1.0);
            corpus.push(rigid_rotation(Vec3::new(0.0, 0.0, 1.0)));
            corpus.push(rigid_rotation(Vec3::new(0.3, -0.5, 0.8)));
            corpus.push(toroidal_navier(Vec3::new(1.0, 2.0, -0.5), radius, zeta, 2));
            for seed in 1..=4 {
                corpus.push(solenoidal_poly(seed, 3, Tangency::Surface(*surface)));
            }
        }
        SurfaceGeometry::Ellipsoid { .. } => {
            for seed in 1..=5 {
                corpus.push(solenoidal_poly(seed, 3, Tangency::Surface(*surface)));
            }
        }
    }
    corpus
}

/// `exp(-(z - z0) / zeta)`, the flat-wall Navier profile at `z = z0`.
fn exp_profile(z0: f64, zeta: f64) -> Expr {
    Expr::exp(2, -1.0 / zeta).scale((z0 / zeta).exp())
}

type VecFn<'a> = dyn Fn(&Vec3) -> Vec3 + 'a;

fn fd_curl(f: &VecFn<'_>, x: &Vec3, h: f64) -> Vec3 {
    let d = |axis: usize| {
        let e = Vec3::ith(axis, h);
        (f(&(x + e)) - f(&(x - e))) / (2.0 * h)
    };
    let (dx, dy, dz) = (d(0), d(1), d(2));
    Vec3::new(dy.z - dz.y, dz.x - dx.z, dx.y - dy.x)
}

fn fd_iterated_curl(f: &VecFn<'_>, r: usize, x: &Vec3, h: f64) -> Vec3 {
    if r == 0 {
        return f(x);
    }
    let inner = |y: &Vec3| fd_iterated_curl(f, r - 1, y, h);
    fd_curl(&inner, x, h)
}

/// Finite-difference step for `r` nested curls.
fn fd_step(r: usize) -> f64 {
    match r {
        0 | 1 => 1e-5,
        2 => 2e-4,
        _ => 1e-3,
    }
}

/// Order-`r` iterated Navier residual
/// `pi(curl^{r+1} u) + (1/zeta) R pi(curl^r u) - 2 sigma R pi(curl^r(S pi u))`.
///
/// Flat walls are evaluated symbolically (`S = 0`); on curved surfaces the
/// curvature term `curl^r(S pi u)` uses the collar extension of `n` and
/// nested central differences, so the residual there carries an
/// `O(h^2)` discretization floor.
pub fn iterated_navier_residual(
    u: &AnalyticField,
    surface: &SurfaceGeometry,
    zeta: f64,
    sigma: i8,
    r: usize,
    samples: &[Vec3],
) -> Result<BCResidualReport> {
    check_zeta(zeta)?;
    let base = navier_geometric_residual(u, surface, zeta, sigma, samples)?;
    let scale = samples
        .iter()
        .map(|x| 1.0 + u.value(x).norm() + u.jacobian(x).norm())
        .fold(1.0, f64::max);
    let tolerance = EQUIVALENCE_TOL * scale;
    if base.max_residual > tolerance {
        return Err(Error::BaseConditionViolated { residual: base.max_residual, tolerance });
    }
    let qr = u.iterated_curl(r);
    let qr1 = qr.curl();
    let flat = surface.is_flat();
    let s_pi_u = |y: &Vec3| {
        let n = surface.normal_extended(y);
        surface.shape_operator_extended(y, &tangential_project(&n, &u.value(y)))
    };
    let h = fd_step(r);
    let values = samples
        .iter()
        .map(|x| {
            let n = normal_at(surface, x)?;
            let mut res = tangential_project(&n, &qr1.value(x)) + n.cross(&tangential_project(&n, &qr.value(x))) / zeta;
            if !flat {
                let curv = fd_iterated_curl(&s_pi_u, r, x, h);
                res -= 2.0 * f64::from(sigma) * n.cross(&tangential_project(&n, &curv));
            }
            Ok(res.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BCResidualReport::from_values(Condition::IteratedNavier(r), &values, Some(sigma)))
}

/// Deviation between `pi curl R pi V` and `R pi curl V` on a flat wall, for
/// a field whose wall-normal component vanishes identically.
pub fn commutation_check(v: &AnalyticField, surface: &SurfaceGeometry, samples: &[Vec3]) -> Result<BCResidualReport> {
    let SurfaceGeometry::FlatWall { orientation, .. } = *surface else {
        return Err(Error::PreconditionViolated(vec![format!(
            "commutation check needs a flat wall, got {}",
            surface.name()
        )]));
    };
    if !v.component(2).is_zero() {
        return Err(Error::PreconditionViolated(vec![format!(
            "{}: wall-normal component is not identically zero",
            v.label
        )]));
    }
    let o = f64::from(orientation);
    // with n = (0, 0, o): R pi V = n x V = o (-V_y, V_x, 0)
    let rotated = AnalyticField::new(
        "R pi V",
        [v.component(1).scale(-o), v.component(0).scale(o), Expr::zero()],
    );
    let lhs_field = rotated.curl();
    let rhs_field = v.curl();
    let values = samples
        .iter()
        .map(|x| {
            let n = normal_at(surface, x)?;
            let lhs = tangential_project(&n, &lhs_field.value(x));
            let rhs = n.cross(&tangential_project(&n, &rhs_field.value(x)));
            Ok((lhs - rhs).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BCResidualReport::from_values(Condition::Commutation, &values, None))
}
