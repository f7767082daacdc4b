//! Inviscid-limit campaign: one Euler reference run, Navier–Stokes runs
//! over a viscosity ladder from the same initial data, Sobolev error
//! norms at every save point, and log-log rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::field::{CatalogParams, ChannelGrid, SpectralField};
use crate::solver::{run_observed, InitialData, SimConfig};

/// Campaign description. `base` fixes grid, horizon, step, save cadence
/// and initial data; its `nu` and `zeta` are overridden per run.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub base: SimConfig,
    pub nu_ladder: Vec<f64>,
    pub zeta: f64,
    pub error_orders: Vec<usize>,
}

impl CampaignSpec {
    /// Ladder `1e-2 .. 1e-4`, `T = 0.5`, `r = 2`, `32 x 32 x 65`, sheared
    /// Robin data scaled to `E_2 = 1`.
    pub fn default_campaign() -> Self {
        let zeta = 1.0;
        let params = CatalogParams { zeta, seed: 7, ..CatalogParams::default() };
        let mut base = SimConfig::new(
            ChannelGrid::periodic_2pi(32, 32, 65),
            InitialData::Catalog { name: "sheared_robin".into(), params },
        );
        base.dt = 1e-3;
        base.t_final = 0.5;
        base.r = 2;
        base.save_every = 10;
        base.normalize_energy_order = Some(2);
        CampaignSpec { base, nu_ladder: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4], zeta, error_orders: vec![0, 1, 2] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu_ladder.len() < 3 {
            return Err(Error::ConfigInvalid(format!(
                "nu_ladder needs at least 3 entries, got {}",
                self.nu_ladder.len()
            )));
        }
        if let Some(nu) = self.nu_ladder.iter().find(|nu| !(**nu > 0.0 && nu.is_finite())) {
            return Err(Error::ConfigInvalid(format!("nu_ladder entries must be positive, got {nu}")));
        }
        if let Some(w) = self.nu_ladder.windows(2).find(|w| w[1] >= w[0]) {
            return Err(Error::ConfigInvalid(format!(
                "nu_ladder must be strictly decreasing ({} then {})",
                w[0], w[1]
            )));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::NonpositiveSlipLength(self.zeta));
        }
        if self.error_orders.is_empty() {
            return Err(Error::ConfigInvalid("error_orders is empty".into()));
        }
        let max = self.base.grid.nz / 4;
        if let Some(k) = self.error_orders.iter().chain([&(self.base.r + 1)]).find(|k| **k > max) {
            return Err(Error::OrderTooHigh { requested: *k, max });
        }
        self.base.validate()
    }

    fn config_for(&self, nu: f64) -> SimConfig {
        let mut c = self.base.clone();
        c.nu = nu;
        c.zeta = self.zeta;
        c
    }
}

/// Log-log least-squares fit `log err = slope log nu + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// root-mean-square residual in log space
    pub residual: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope (Student t, n - 2 dof)
    pub slope_ci95: (f64, f64),
    /// slope >= 1/3 - 0.02
    pub meets_cube_root: bool,
    /// slope >= 1/2 - 0.05
    pub consistent_sqrt: bool,
}

pub const CUBE_ROOT_FLOOR: f64 = 1.0 / 3.0 - 0.02;
pub const SQRT_FLOOR: f64 = 0.5 - 0.05;

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(nu, e)) = points.iter().find(|(nu, e)| !(*nu > 0.0) || !(*e > 0.0)) {
        return Err(Error::NonpositiveValue(if nu > 0.0 { e } else { nu }));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ConfigInvalid("all viscosities are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let slope_stderr = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
    let half = t * slope_stderr;
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        residual: (ssr / n).sqrt(),
        slope_stderr,
        slope_ci95: (slope - half, slope + half),
        meets_cube_root: slope >= CUBE_ROOT_FLOOR,
        consistent_sqrt: slope >= SQRT_FLOOR,
    })
}

/// One row per `(nu, t)` save point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub nu: f64,
    pub t: f64,
    /// `||u^nu - u||_{H^k}` for each entry of `error_orders`
    pub err: Vec<f64>,
    /// `||u^nu - u||_{H^{r+1}}^2`
    pub err_next_sq: f64,
    /// `max_grid |grad u^nu - grad u|`
    pub grad_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSummary {
    pub nu: f64,
    /// sup over save points, per error order
    pub sup_err: Vec<f64>,
    /// trapezoid integral over save points of `||u^nu - u||_{H^{r+1}}^2`
    pub integrated_next_sq: f64,
    pub grad_inf_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    /// `(nu, t, grad_inf)`
    pub rows: Vec<(f64, f64, f64)>,
    /// `(nu, max_t grad_inf)`
    pub max_per_nu: Vec<(f64, f64)>,
    pub overall_max: f64,
    /// max over the two smallest nu within 2x of the max over the two largest
    pub uniform: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub r: usize,
    pub error_orders: Vec<usize>,
    pub raw: Vec<RawRow>,
    pub summaries: Vec<LadderSummary>,
    /// `(order, fit of sup_t error)`
    pub fits: Vec<(usize, RateFit)>,
    /// `(nu, reason)` of ladder entries that did not complete
    pub failures: Vec<(f64, String)>,
    /// largest completed viscosity
    pub nu_star: Option<f64>,
    /// max error at t = 0 over all runs and orders
    pub t0_max_error: f64,
    /// sup error of order `r` strictly decreasing along the ladder
    pub strictly_decreasing: bool,
    /// same, allowing 5% increases
    pub monotone_with_slack: bool,
    pub gradient: GradientProbe,
    /// slope of order `r` compared with `1/2 - 0.05` when the gradient
    /// probe is uniform
    pub sqrt_regime: Option<bool>,
}

impl CampaignResult {
    pub fn fit_for(&self, order: usize) -> Option<&RateFit> {
        self.fits.iter().find(|(k, _)| *k == order).map(|(_, f)| f)
    }

    pub fn summary_for(&self, nu: f64) -> Option<&LadderSummary> {
        self.summaries.iter().find(|s| s.nu == nu)
    }
}

fn errors_of(diff: &SpectralField, orders: &[usize], next: usize) -> Result<(Vec<f64>, f64, f64)> {
    let top = orders.iter().copied().max().unwrap_or(0).max(next);
    let norm = diff.sobolev_norm(top)?;
    // partial sums of the breakdown give every lower order
    let upto = |k: usize| norm.breakdown[..=k].iter().sum::<f64>();
    let err = orders.iter().map(|&k| upto(k).sqrt()).collect();
    Ok((err, upto(next), diff.gradient_max_norm()))
}

/// Run the campaign. Ladder entries run in parallel; results are
/// aggregated in ladder order, so the output is deterministic.
pub fn inviscid_limit_campaign(spec: &CampaignSpec) -> Result<CampaignResult> {
    spec.validate()?;
    let mut euler_cfg = spec.config_for(0.0);
    euler_cfg.nu = 0.0;
    let mut reference: Vec<(f64, SpectralField)> = Vec::new();
    run_observed(&euler_cfg, |s| {
        reference.push((s.t, s.u.clone()));
        Ok(())
    })?;
    let next = spec.base.r + 1;

    let runs: Vec<Result<Vec<RawRow>>> = spec
        .nu_ladder
        .par_iter()
        .map(|&nu| {
            let mut rows = Vec::with_capacity(reference.len());
            run_observed(&spec.config_for(nu), |s| {
                let (t_ref, u_ref) = &reference[rows.len()];
                debug_assert!((t_ref - s.t).abs() < 1e-9);
                let (err, err_next_sq, grad_inf) = errors_of(&s.u.sub(u_ref), &spec.error_orders, next)?;
                rows.push(RawRow { nu, t: *t_ref, err, err_next_sq, grad_inf });
                Ok(())
            })
            .map_err(|e| Error::LadderRunFailed { nu, reason: e.to_string() })?;
            Ok(rows)
        })
        .collect();

    let mut raw = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (nu, res) in spec.nu_ladder.iter().zip(runs) {
        match res {
            Ok(rows) => {
                let sup_err = (0..spec.error_orders.len())
                    .map(|i| rows.iter().map(|r| r.err[i]).fold(0.0, f64::max))
                    .collect();
                let integrated_next_sq =
                    rows.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].err_next_sq + w[1].err_next_sq)).sum();
                let grad_inf_max = rows.iter().map(|r| r.grad_inf).fold(0.0, f64::max);
                summaries.push(LadderSummary { nu: *nu, sup_err, integrated_next_sq, grad_inf_max });
                raw.extend(rows);
            }
            Err(Error::LadderRunFailed { nu, reason }) => failures.push((nu, reason)),
            Err(e) => return Err(e),
        }
    }
    if summaries.len() < 3 {
        let (nu, reason) = failures.first().cloned().unwrap_or((f64::NAN, "too few runs".into()));
        return Err(Error::LadderRunFailed { nu, reason });
    }

    let mut fits = Vec::new();
    for (i, &k) in spec.error_orders.iter().enumerate() {
        let pts: Vec<(f64, f64)> = summaries.iter().map(|s| (s.nu, s.sup_err[i])).collect();
        // identically zero errors (e.g. zero data) have no meaningful fit
        if pts.iter().all(|p| p.1 > 0.0) {
            fits.push((k, fit_rate(&pts)?));
        }
    }
    let r_index = spec.error_orders.iter().position(|&k| k == spec.base.r);
    let sup_r: Vec<f64> = match r_index {
        Some(i) => summaries.iter().map(|s| s.sup_err[i]).collect(),
        None => summaries.iter().map(|s| *s.sup_err.last().unwrap_or(&0.0)).collect(),
    };
    let strictly_decreasing = sup_r.windows(2).all(|w| w[1] < w[0]);
    let monotone_with_slack = sup_r.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let t0_max_error = raw
        .iter()
        .filter(|r| r.t == 0.0)
        .flat_map(|r| r.err.iter().copied())
        .fold(0.0, f64::max);
    let gradient = gradient_uniformity_probe(&raw);
    let sqrt_regime = if gradient.uniform {
        fits.iter().find(|(k, _)| *k == spec.base.r).map(|(_, f)| f.consistent_sqrt)
    } else {
        None
    };
    Ok(CampaignResult {
        r: spec.base.r,
        error_orders: spec.error_orders.clone(),
        raw,
        nu_star: summaries.first().map(|s| s.nu),
        summaries,
        fits,
        failures,
        t0_max_error,
        strictly_decreasing,
        monotone_with_slack,
        gradient,
        sqrt_regime,
    })
}

/// Tabulate `max |grad u^nu - grad u|` and decide whether it is uniform in
/// `nu`. Rows must be in ladder order (descending `nu`).
pub fn gradient_uniformity_probe(raw: &[RawRow]) -> GradientProbe {
    let rows: Vec<(f64, f64, f64)> = raw.iter().map(|r| (r.nu, r.t, r.grad_inf)).collect();
    let mut max_per_nu: Vec<(f64, f64)> = Vec::new();
    for r in raw {
        match max_per_nu.last_mut() {
            Some((nu, m)) if *nu == r.nu => *m = m.max(r.grad_inf),
            _ => max_per_nu.push((r.nu, r.grad_inf)),
        }
    }
    let overall_max = max_per_nu.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut sorted = max_per_nu.clone();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let take = sorted.len().min(2);
    let large = sorted[..take].iter().map(|p| p.1).fold(0.0, f64::max);
    let small = sorted[sorted.len() - take..].iter().map(|p| p.1).fold(0.0, f64::max);
    GradientProbe { rows, max_per_nu, overall_max, uniform: small <= 2.0 * large }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ladder() -> [f64; 3] {
        [1e-2, 1e-3, 1e-4]
    }

    #[test]
    fn exact_power_laws() {
        let f = fit_rate(&ladder().map(|nu| (nu, 2.0 * nu.sqrt()))).unwrap();
        assert_abs_diff_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 2f64.ln(), epsilon = 1e-11);
        assert!(f.consistent_sqrt && f.meets_cube_root);
        let f = fit_rate(&ladder().map(|nu| (nu, 7.0 * nu.cbrt()))).unwrap();
        assert_abs_diff_eq!(f.slope, 1.0 / 3.0, epsilon = 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn perturbed_point_stays_inside_interval() {
        for i in 0..3 {
            let mut pts = ladder().map(|nu| (nu, 2.0 * nu.sqrt()));
            pts[i].1 *= 1.1;
            let f = fit_rate(&pts).unwrap();
            assert!(f.slope_ci95.0 <= 0.5 && 0.5 <= f.slope_ci95.1, "{f:?}");
            assert!(f.residual > 0.0);
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_rate(&[(1e-2, 1.0), (1e-3, 0.5)]), Err(Error::TooFewPoints(2))));
        assert!(matches!(fit_rate(&[(1e-2, 1.0), (1e-3, 0.0), (1e-4, 0.1)]), Err(Error::NonpositiveValue(_))));
    }

    #[test]
    fn ladder_validation() {
        let mut spec = CampaignSpec::default_campaign();
        assert!(spec.validate().is_ok());
        spec.nu_ladder = vec![1e-2, 1e-3, 1e-3];
        assert!(matches!(spec.validate(), Err(Error::ConfigInvalid(_))));
        spec.nu_ladder = vec![1e-2, 1e-3];
        assert!(matches!(spec.validate(), Err(Error::ConfigInvalid(_))));
        spec.nu_ladder = vec![1e-2, 0.0, -1.0];
        assert!(matches!(spec.validate(), Err(Error::ConfigInvalid(_))));
    }

    fn small_spec(initial: InitialData) -> CampaignSpec {
        let mut base = SimConfig::new(ChannelGrid::periodic_2pi(4, 4, 33), initial);
        base.dt = 1e-2;
        base.t_final = 0.5;
        base.save_every = 5;
        CampaignSpec { base, nu_ladder: vec![1e-1, 1e-2, 1e-3, 1e-4], zeta: 1.0, error_orders: vec![0, 2] }
    }

    #[test]
    fn robin_mode_campaign_is_linear_in_nu() {
        // the mode is a steady Euler solution and decays like exp(-nu l^2 t)
        let res = inviscid_limit_campaign(&small_spec(InitialData::catalog("channel_robin_mode"))).unwrap();
        assert_eq!(res.raw.len(), 4 * 11);
        assert_eq!(res.t0_max_error, 0.0);
        assert!(res.strictly_decreasing);
        let fit = res.fit_for(2).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
        assert!(res.gradient.uniform);
        assert_eq!(res.sqrt_regime, Some(true));
        assert_eq!(res.nu_star, Some(1e-1));
    }

    #[test]
    fn zero_campaign() {
        let res = inviscid_limit_campaign(&small_spec(InitialData::catalog("zero"))).unwrap();
        assert!(res.raw.iter().all(|r| r.grad_inf == 0.0 && r.err.iter().all(|e| *e == 0.0)));
        assert!(res.gradient.uniform);
        assert!(res.fits.is_empty());
    }

    #[test]
    fn probe_rows_match_raw_table() {
        let raw: Vec<RawRow> = [1e-1, 1e-2]
            .iter()
            .flat_map(|&nu| {
                (0..3).map(move |i| RawRow { nu, t: i as f64, err: vec![], err_next_sq: 0.0, grad_inf: nu * i as f64 })
            })
            .collect();
        let p = gradient_uniformity_probe(&raw);
        assert_eq!(p.rows.len(), 6);
        assert_eq!(p.max_per_nu, vec![(1e-1, 0.2), (1e-2, 0.02)]);
        assert!(p.uniform);
    }
}
