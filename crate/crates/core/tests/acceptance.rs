//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slipflow::boundary::{default_corpus, default_samples, equivalence_check};
use slipflow::experiments::{inviscid_limit_campaign, CampaignSpec, CUBE_ROOT_FLOOR, SQRT_FLOOR};
use slipflow::field::analytic::{channel_robin_mode, random_analytic, rigid_rotation, robin_even_root, sheared_robin, solenoidal_poly};
use slipflow::field::{AnalyticField, CatalogParams, ChannelGrid, Domain, SpectralField, Tangency};
use slipflow::geometry::{SurfaceGeometry, Vec3};
use slipflow::identities::{divcurl_base_check, divcurl_ratio, identity_corpus, lie_bracket, persistence_check, Resolution};
use slipflow::solver::{differential_inequality_audit, energy_balance_check, run, tstar_estimate, InitialData, SimConfig};

fn verdict(n: usize, ok: bool, detail: String) {
    println!("[{}] criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_1_divcurl_base_identity() {
    let ball = Domain::unit_ball();
    let res = Resolution::default();
    let rep = divcurl_base_check(&rigid_rotation(Vec3::new(0.0, 0.0, 1.0)), &ball, &res).unwrap();
    let errs = [
        rel(rep.term("grad_sq").unwrap(), 8.0 * PI / 3.0),
        rel(rep.term("curl_sq").unwrap(), 16.0 * PI / 3.0),
        rel(rep.term("boundary_II").unwrap(), -8.0 * PI / 3.0),
    ];
    let sphere = SurfaceGeometry::UnitSphere;
    let corpus_worst = (1..=5)
        .map(|seed| {
            let u = solenoidal_poly(seed, 4, Tangency::Surface(sphere));
            divcurl_base_check(&u, &ball, &res).unwrap().rel_residual
        })
        .fold(0.0, f64::max);
    let max_err = errs.iter().copied().fold(0.0, f64::max);
    verdict(
        1,
        max_err < 1e-10 && corpus_worst < 1e-6,
        format!("rigid rotation terms rel err {max_err:.2e} (< 1e-10); corpus identity residual {corpus_worst:.2e} (< 1e-6)"),
    );
}

#[test]
fn criterion_2_boundary_condition_equivalence() {
    let surfaces = [SurfaceGeometry::UnitSphere, SurfaceGeometry::ellipsoid(1.0, 1.5, 2.0), SurfaceGeometry::flat_wall(1.0, 1)];
    let mut allowed = vec![1i8, -1];
    let mut worst: f64 = 0.0;
    for s in &surfaces {
        for zeta in [0.5, 1.0, 2.0] {
            let out = equivalence_check(s, zeta, &default_corpus(s, zeta), &default_samples(s)).unwrap();
            allowed.retain(|sig| out.consistent.contains(sig));
            let dev = if out.consistent.contains(&-1) { out.deviation_minus } else { out.deviation_plus };
            worst = worst.max(dev);
        }
    }
    let global = (allowed.len() == 1).then(|| allowed[0]);
    verdict(
        2,
        global.is_some() && worst < 1e-8,
        format!("global sigma* = {global:?}; max deviation {worst:.2e} (< 1e-8)"),
    );
}

#[test]
fn criterion_3_ratio_stable_under_refinement() {
    let base = Resolution { volume: 24, surface: (32, 64) };
    let fine = base.doubled();
    let zeta = 1.0;
    let domains = [Domain::unit_ball(), Domain::channel_2pi()];
    let mut worst_change: f64 = 0.0;
    let mut summary = Vec::new();
    for r in 0..=2 {
        let mut max_coarse: f64 = 0.0;
        let mut max_fine: f64 = 0.0;
        for d in &domains {
            for u in identity_corpus(d, Some(zeta)) {
                let a = divcurl_ratio(&u, d, r, Some(zeta), &base).unwrap().term("rho").unwrap();
                let b = divcurl_ratio(&u, d, r, Some(zeta), &fine).unwrap().term("rho").unwrap();
                assert!(a.is_finite() && b.is_finite());
                max_coarse = max_coarse.max(a);
                max_fine = max_fine.max(b);
            }
        }
        worst_change = worst_change.max(rel(max_coarse, max_fine));
        summary.push(format!("r={r}: {max_fine:.4}"));
    }
    verdict(
        3,
        worst_change < 0.10,
        format!("corpus max rho {} ; change under doubling {worst_change:.2e} (< 10%)", summary.join(", ")),
    );
}

fn robin_run(dt: f64) -> (f64, f64, f64) {
    let zeta = 1.0;
    let mut c = SimConfig::new(ChannelGrid::periodic_2pi(4, 4, 65), InitialData::Analytic(channel_robin_mode(zeta)));
    c.nu = 0.1;
    c.zeta = zeta;
    c.dt = dt;
    c.t_final = 1.0;
    c.save_every = 20;
    let (traj, report) = run(&c).unwrap();
    let l = robin_even_root(zeta);
    let exact = SpectralField::from_analytic(c.grid, &channel_robin_mode(zeta)).scale((-c.nu * l * l).exp());
    let err = traj.last().unwrap().u.sub(&exact).max_norm();
    let e_ratio = report.rows.last().unwrap().e0 / report.rows[0].e0;
    let decay_err = (e_ratio - (-2.0 * c.nu * l * l).exp()).abs();
    (err, energy_balance_check(&report).rel_residual, decay_err)
}

#[test]
fn criterion_4_solver_verification() {
    let (err, bal, decay) = robin_run(1e-3);
    let (_, bal_half, _) = robin_run(5e-4);
    let ratio = bal / bal_half;

    let params = CatalogParams { zeta: 1.0, seed: 7, ..CatalogParams::default() };
    let mut euler = SimConfig::new(
        ChannelGrid::periodic_2pi(32, 32, 65),
        InitialData::Catalog { name: "sheared_robin".into(), params },
    );
    euler.nu = 0.0;
    euler.dt = 1e-3;
    euler.t_final = 0.5;
    euler.normalize_energy_order = Some(2);
    let (_, report) = run(&euler).unwrap();
    let drift = energy_balance_check(&report).rel_residual;

    let ok = err < 1e-6 && decay < 1e-6 && bal < 1e-6 && (3.0..=5.0).contains(&ratio) && drift < 1e-6;
    verdict(
        4,
        ok,
        format!(
            "Robin mode Linf err {err:.2e} (< 1e-6), E0 decay err {decay:.2e}; balance {bal:.2e} -> {bal_half:.2e} under dt/2 (ratio {ratio:.2}); Euler E0 drift {drift:.2e} (< 1e-6)"
        ),
    );
}

#[test]
fn criterion_5_inviscid_limit_campaign() {
    let spec = CampaignSpec::default_campaign();
    let res = inviscid_limit_campaign(&spec).unwrap();
    let fit = res.fit_for(spec.base.r).expect("H^2 fit");
    let sup: Vec<String> = res.summaries.iter().map(|s| format!("{:.3e}", s.sup_err[2])).collect();
    let sqrt_note = match res.sqrt_regime {
        Some(true) => format!("gradient probe uniform; slope also >= {SQRT_FLOOR:.2}"),
        Some(false) => format!("gradient probe uniform; slope below {SQRT_FLOOR:.2}"),
        None => "gradient probe not uniform; sqrt rate not compared".into(),
    };
    let ok = res.failures.is_empty() && res.strictly_decreasing && fit.slope >= CUBE_ROOT_FLOOR && res.t0_max_error < 1e-12;
    verdict(
        5,
        ok,
        format!(
            "sup_t H2 errors [{}] strictly decreasing = {}; slope {:.4} (floor {:.4}, 95% CI [{:.3}, {:.3}]); t=0 error {:.1e}; {}",
            sup.join(", "),
            res.strictly_decreasing,
            fit.slope,
            CUBE_ROOT_FLOOR,
            fit.slope_ci95.0,
            fit.slope_ci95.1,
            res.t0_max_error,
            sqrt_note
        ),
    );
}

#[test]
fn criterion_6_persistence_brackets() {
    let ez = Vec3::new(0.0, 0.0, 1.0);
    let sphere = SurfaceGeometry::UnitSphere;
    let x0 = Vec3::new(0.6, 0.0, 0.8);
    let rot = persistence_check(&rigid_rotation(ez), &AnalyticField::constant(ez * 2.0), &sphere, &x0).unwrap();
    let zero_bracket = rot.bracket.iter().all(|b| b.abs() < 1e-14);

    let shear = AnalyticField::new("shear", [slipflow::field::Expr::coord(2), slipflow::field::Expr::zero(), slipflow::field::Expr::zero()]);
    let v = persistence_check(&rigid_rotation(ez), &shear, &sphere, &ez).unwrap();
    let unit = (v.bracket_cross_n_norm - 1.0).abs() < 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let u = random_analytic(100 + 2 * k);
        let w = random_analytic(101 + 2 * k);
        let v = random_analytic(500 + k);
        let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let anti = (lie_bracket(&u, &w, &x) + lie_bracket(&w, &u, &x)).norm();
        let combo = u.scale(a).add(&v.scale(b));
        let lin = (lie_bracket(&combo, &w, &x) - lie_bracket(&u, &w, &x) * a - lie_bracket(&v, &w, &x) * b).norm();
        let scale = 1.0 + lie_bracket(&u, &w, &x).norm() + lie_bracket(&v, &w, &x).norm();
        worst = worst.max(anti / scale).max(lin / scale);
    }
    verdict(
        6,
        zero_bracket && unit && worst < 1e-12,
        format!(
            "rigid rotation/constant vorticity bracket {:?}; |b x n| = {:.15} at (0,0,1); antisymmetry/bilinearity defect {worst:.1e} over 20 pairs",
            rot.bracket, v.bracket_cross_n_norm
        ),
    );
}

#[test]
fn criterion_7_tstar_and_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let e: f64 = rng.random_range(0.0..10.0);
        let m: f64 = rng.random_range(0.1..5.0);
        let eta: f64 = rng.random_range(0.01..2.0);
        let direct = (1.0 / m) * (1.0 + 1.0 / (eta + e)).ln();
        worst = worst.max(rel(tstar_estimate(e, m, eta).unwrap(), direct));
    }
    let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
    let e: Vec<f64> = t.iter().map(|t| 1.0 / (11.0 * (-t).exp() - 1.0)).collect();
    let audit = differential_inequality_audit(&t, &e, None, 1.0).unwrap();
    let ok = worst < 1e-14 && (audit.m_fit - 1.0).abs() < 1e-3;
    verdict(
        7,
        ok,
        format!("T* max rel deviation {worst:.1e} (< 1e-14); audit M_fit = {:.6} (1 +- 1e-3)", audit.m_fit),
    );
}

// keeps the sheared data import honest: the campaign initial field is a
// Robin-compatible channel field
#[test]
fn campaign_data_is_tangent_and_navier() {
    let u = sheared_robin(1.0, 7, 2, 3, 1.0);
    let wall = SurfaceGeometry::flat_wall(1.0, 1);
    let samples = default_samples(&wall);
    let k = slipflow::boundary::kinematic_residual(&u, &wall, &samples).unwrap();
    let n = slipflow::boundary::navier_classical_residual(&u, &wall, 1.0, &samples).unwrap();
    assert!(k.max_residual < 1e-12 && n.max_residual < 1e-10, "{} {}", k.max_residual, n.max_residual);
}
