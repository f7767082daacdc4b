use proptest::prelude::*;

use slipflow::field::analytic::{sheared_robin, solenoidal_poly};
use slipflow::field::{leray_project, AnalyticField, ChannelGrid, Expr, SpectralField, Tangency};
use slipflow::geometry::Vec3;

fn grid() -> ChannelGrid {
    ChannelGrid::periodic_2pi(8, 8, 17)
}

/// Periodic, non-solenoidal data with low modes.
fn random_periodic(seed: u64) -> AnalyticField {
    let s = seed as f64;
    let comps = [0usize, 1, 2].map(|c| {
        let c = c as f64;
        let a = &Expr::sin(0, 1.0 + (seed % 3) as f64) * &Expr::cos(1, 2.0);
        let b = &Expr::cos(1, 1.0) * &Expr::exp(2, 0.3 * (s + c).sin());
        &(&a.scale((s + c).cos()) + &b) + &Expr::monomial([0, 0, 2]).scale(0.1 * c)
    });
    AnalyticField::new("random_periodic", comps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projection_is_idempotent_and_admissible(seed in 0u64..1000) {
        let mut u = SpectralField::from_analytic(grid(), &random_periodic(seed));
        u.dealias();
        let p = leray_project(&u).unwrap();
        let pp = leray_project(&p).unwrap();
        let scale = p.l2_norm().max(1e-300);
        prop_assert!(pp.sub(&p).l2_norm() < 1e-10 * scale);
        prop_assert!(p.divergence().max_abs() < 1e-8 * scale);
        prop_assert!(p.wall_normal_max() < 1e-12 * scale);
        // orthogonality of the removed part
        let removed = u.sub(&p);
        prop_assert!(removed.inner(&p).abs() < 1e-9 * scale * removed.l2_norm().max(1.0));
    }

    #[test]
    fn spectral_curl_matches_symbolic(seed in 0u64..50, zeta in 0.3f64..3.0) {
        let f = sheared_robin(zeta, seed, 2, 2, 0.7);
        let g = ChannelGrid::periodic_2pi(12, 12, 33);
        let spectral = SpectralField::from_analytic(g, &f).curl();
        let exact = SpectralField::from_analytic(g, &f.curl());
        prop_assert!(spectral.sub(&exact).max_norm() < 1e-8 * (1.0 + exact.max_norm()));
    }
}

#[test]
fn curl_order_is_limited() {
    let u = SpectralField::from_fn(grid(), |_| Vec3::zeros());
    assert!(u.iterated_curl(u.max_curl_order() + 1).is_err());
    assert!(u.iterated_curl(u.max_curl_order()).is_ok());
}

#[test]
fn tangent_polynomial_is_sampled_without_wall_flux() {
    let u = solenoidal_poly(5, 3, Tangency::ChannelWalls);
    let s = SpectralField::from_analytic(grid(), &u);
    assert!(s.wall_normal_max() < 1e-12);
    let div = u.divergence();
    assert!(div.eval(&Vec3::new(0.3, 0.2, 0.1)).abs() < 1e-12);
}
