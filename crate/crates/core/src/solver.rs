//! Pseudo-spectral Navier–Stokes / Euler integration on the channel with
//! Navier-slip (Robin) walls at `z = +-1`.
//!
//! The equations are advanced in rotational form
//! `d_t u = nu Lap u + P(u x w) - grad(...)`, with AB2 for the projected,
//! dealiased nonlinear term, Crank–Nicolson for diffusion (one collocation
//! Helmholtz solve per Fourier mode, Robin rows `d_z u_h = -+ u_h / zeta`
//! at `z = +-1`, Dirichlet rows for `u_z`), and an incremental projection
//! for the pressure. With `nu = 0` only `u_z = 0` is imposed.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::spectral::{apply_z, fft_planes, C64};
use crate::field::{catalog_field, AnalyticField, CatalogParams, ChannelGrid, LerayProjector, SpectralField, SpectralScalar};
use crate::identities::IdentityReport;

/// Where the initial velocity comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Catalog { name: String, params: CatalogParams },
    Analytic(AnalyticField),
    Spectral(SpectralField),
}

impl InitialData {
    pub fn catalog(name: &str) -> Self {
        InitialData::Catalog { name: name.to_string(), params: CatalogParams::default() }
    }
}

/// Full description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: ChannelGrid,
    pub nu: f64,
    /// Slip length; `f64::INFINITY` gives free-slip walls.
    pub zeta: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Order of the diagnostic energy `E_r = ||curl^r u||^2`.
    pub r: usize,
    pub save_every: usize,
    pub initial: InitialData,
    /// Rescale the projected initial field so that `E_k = 1` for this `k`.
    pub normalize_energy_order: Option<usize>,
    pub cfl_limit: f64,
}

impl SimConfig {
    pub fn new(grid: ChannelGrid, initial: InitialData) -> Self {
        SimConfig {
            grid,
            nu: 0.0,
            zeta: 1.0,
            dt: 1e-3,
            t_final: 0.5,
            r: 2,
            save_every: 10,
            initial,
            normalize_energy_order: None,
            cfl_limit: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            bad.push(format!("t_final must be non-negative, got {}", self.t_final));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            bad.push(format!("nu must be non-negative, got {}", self.nu));
        }
        if self.save_every == 0 {
            bad.push("save_every must be at least 1".to_string());
        }
        if self.r > self.grid.nz / 4 {
            bad.push(format!("diagnostic order r = {} exceeds nz/4 = {}", self.r, self.grid.nz / 4));
        }
        if !bad.is_empty() {
            return Err(Error::ConfigInvalid(bad.join("; ")));
        }
        if self.nu > 0.0 && !(self.zeta > 0.0) {
            return Err(Error::NonpositiveSlipLength(self.zeta));
        }
        ChannelGrid::new(self.grid.nx, self.grid.ny, self.grid.nz, self.grid.lx, self.grid.ly)?;
        Ok(())
    }

    /// Number of steps and the step actually used (`t_final / steps`).
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_final / self.dt).round().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }

    fn inv_zeta(&self) -> f64 {
        if self.zeta.is_infinite() {
            0.0
        } else {
            1.0 / self.zeta
        }
    }
}

/// Solution state plus the history the multistep scheme needs.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub step_count: usize,
    pub u: SpectralField,
    /// Dynamic pressure estimate (pressure plus `|u|^2 / 2`).
    pub p: SpectralScalar,
    prev_nonlinear: Option<[Vec<C64>; 3]>,
    pressure_gradient: [Vec<C64>; 3],
    pressure_increment: Vec<C64>,
    // derived quantities of `u`, tagged with the step they belong to
    cache: Option<(usize, Derived)>,
}

impl SolverState {
    /// Fresh state from a velocity field (no scheme history).
    pub fn from_field(u: SpectralField) -> Self {
        let g = u.grid;
        SolverState {
            t: 0.0,
            step_count: 0,
            p: SpectralScalar::zeros(g),
            prev_nonlinear: None,
            pressure_gradient: std::array::from_fn(|_| vec![C64::default(); g.len()]),
            pressure_increment: vec![C64::default(); g.len()],
            cache: None,
            u,
        }
    }
}

/// Instantaneous energy quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub diss: f64,
    pub wall: f64,
    #[serde(rename = "Er")]
    pub er: f64,
    pub balance_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub r: usize,
    pub nu: f64,
    pub zeta: f64,
    pub dt: f64,
    pub rows: Vec<EnergyRow>,
    /// Robin residual `max |d_z u_h +- u_h / zeta|` of the initial field.
    pub initial_navier_residual: f64,
    /// Largest divergence and wall-normal velocity seen at save points,
    /// relative to the L² norm of `u`.
    pub max_divergence: f64,
    pub max_wall_normal: f64,
}

impl EnergyReport {
    pub fn empty(r: usize) -> Self {
        EnergyReport {
            r,
            nu: 0.0,
            zeta: f64::INFINITY,
            dt: 0.0,
            rows: Vec::new(),
            initial_navier_residual: 0.0,
            max_divergence: 0.0,
            max_wall_normal: 0.0,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn er_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.er).collect()
    }
}

/// Per-mode Crank–Nicolson factors for the tangential (Robin) and normal
/// (Dirichlet) components.
struct Helmholtz {
    alpha: f64,
    factors: HashMap<(usize, usize), (LU<f64, nalgebra::Dyn, nalgebra::Dyn>, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

fn abs_mode(i: usize, n: usize) -> usize {
    ChannelGrid::signed_mode(i, n).unsigned_abs() as usize
}

impl Helmholtz {
    fn new(grid: &ChannelGrid, alpha: f64, inv_zeta: f64) -> Self {
        let basis = grid.basis();
        let n = grid.nz;
        let mut factors = HashMap::new();
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                if !grid.dealias_keep(ix, iy) || grid.is_nyquist(ix, iy) {
                    continue;
                }
                let key = (abs_mode(ix, grid.nx), abs_mode(iy, grid.ny));
                if factors.contains_key(&key) {
                    continue;
                }
                let k2 = grid.kx(ix).powi(2) + grid.ky(iy).powi(2);
                let mut a = DMatrix::identity(n, n) * (1.0 + alpha * k2) - &basis.d2 * alpha;
                let mut robin = a.clone();
                for j in 0..n {
                    robin[(0, j)] = basis.d1[(0, j)];
                    robin[(n - 1, j)] = basis.d1[(n - 1, j)];
                }
                robin[(0, 0)] += inv_zeta;
                robin[(n - 1, n - 1)] -= inv_zeta;
                for j in 0..n {
                    a[(0, j)] = 0.0;
                    a[(n - 1, j)] = 0.0;
                }
                a[(0, 0)] = 1.0;
                a[(n - 1, n - 1)] = 1.0;
                factors.insert(key, (robin.lu(), a.lu()));
            }
        }
        Helmholtz { alpha, factors }
    }
}

/// Precomputed operators for one configuration.
pub struct Stepper {
    pub config: SimConfig,
    grid: ChannelGrid,
    dt: f64,
    projector: LerayProjector,
    helmholtz: Option<Helmholtz>,
    /// smallest spacing around each z node
    dz_local: Vec<f64>,
}

/// Quantities computed from `u` at the start of each step.
#[derive(Debug, Clone)]
struct Derived {
    nonlinear: [Vec<C64>; 3],
    p_nonlinear: Vec<C64>,
    cfl: f64,
    diss: f64,
    wall: f64,
    e0: f64,
}

impl Stepper {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let (_, dt) = config.steps();
        let projector = LerayProjector::new(grid)?;
        let helmholtz = (config.nu > 0.0).then(|| Helmholtz::new(&grid, 0.5 * config.nu * dt, config.inv_zeta()));
        let z = grid.z_nodes();
        let n = z.len();
        let dz_local = (0..n)
            .map(|k| {
                let up = if k > 0 { z[k - 1] - z[k] } else { f64::INFINITY };
                let down = if k + 1 < n { z[k] - z[k + 1] } else { f64::INFINITY };
                up.min(down)
            })
            .collect();
        Ok(Stepper { config: config.clone(), grid, dt, projector, helmholtz, dz_local })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn projector(&self) -> &LerayProjector {
        &self.projector
    }

    /// Sample, dealias, project (and optionally normalize) the initial data.
    pub fn init_state(&self) -> Result<SolverState> {
        let g = self.grid;
        let mut u = match &self.config.initial {
            InitialData::Catalog { name, params } => SpectralField::from_analytic(g, &catalog_field(name, params)?),
            InitialData::Analytic(f) => SpectralField::from_analytic(g, f),
            InitialData::Spectral(f) => {
                if f.grid != g {
                    return Err(Error::ConfigInvalid("initial spectral field is on a different grid".into()));
                }
                f.clone()
            }
        };
        u.enforce_hermitian();
        u.dealias();
        let mut u = self.projector.project(&u);
        if let Some(k) = self.config.normalize_energy_order {
            let ek = u.iterated_curl(k)?.l2_norm_sq();
            if ek > 0.0 {
                u = u.scale(1.0 / ek.sqrt());
            }
        }
        let wall = u.wall_normal_max();
        let scale = u.max_norm();
        if wall > 1e-10 * scale.max(1e-300) && wall > 1e-14 {
            return Err(Error::ConfigInvalid(format!("initial field not tangent to walls: |u_z| = {wall:e}")));
        }
        let state = SolverState::from_field(u);
        let cfl = self.cfl_of(&state.u);
        if cfl > self.config.cfl_limit {
            return Err(Error::CflViolated { cfl, limit: self.config.cfl_limit });
        }
        Ok(state)
    }

    fn cfl_of(&self, u: &SpectralField) -> f64 {
        let v = u.to_grid_values();
        self.cfl_from_values(&v[..self.grid.len()], &v[self.grid.len()..2 * self.grid.len()], &v[2 * self.grid.len()..])
    }

    /// `dt max(|u|/dx + |v|/dy + |w|/dz_local)` with values x-fastest.
    fn cfl_from_values(&self, ux: &[f64], uy: &[f64], uz: &[f64]) -> f64 {
        let g = self.grid;
        let dx = g.lx / g.nx as f64;
        let dy = g.ly / g.ny as f64;
        let plane = g.ncol();
        let mut worst: f64 = 0.0;
        for k in 0..g.nz {
            for a in k * plane..(k + 1) * plane {
                worst = worst.max(ux[a].abs() / dx + uy[a].abs() / dy + uz[a].abs() / self.dz_local[k]);
            }
        }
        worst * self.dt
    }

    /// Robin residual of the tangential components at both walls.
    pub fn navier_residual(&self, u: &SpectralField) -> f64 {
        let inv = self.config.inv_zeta();
        let plane = self.grid.ncol();
        let n = self.grid.nz;
        let mut worst: f64 = 0.0;
        for c in 0..2 {
            let d = u.comps[c].dz().to_grid_values();
            let v = u.comps[c].to_grid_values();
            for a in 0..plane {
                worst = worst.max((d[a] + inv * v[a]).abs());
                let b = (n - 1) * plane + a;
                worst = worst.max((d[b] - inv * v[b]).abs());
            }
        }
        worst
    }

    fn derive(&self, u: &SpectralField) -> Derived {
        let g = self.grid;
        let len = g.len();
        let basis = g.basis();
        let mut dz: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::default(); len]);
        for c in 0..3 {
            apply_z(&g, &basis.d1t, &u.comps[c].data, &mut dz[c]);
        }
        let iu = C64::new(0.0, 1.0);
        let mut omega: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::default(); len]);
        let (ux, uy, uz) = (&u.comps[0].data, &u.comps[1].data, &u.comps[2].data);
        for k in 0..g.nz {
            for ix in 0..g.nx {
                let kx = g.kx(ix);
                for iy in 0..g.ny {
                    let ky = g.ky(iy);
                    let a = g.index(k, ix, iy);
                    omega[0][a] = iu * ky * uz[a] - dz[1][a];
                    omega[1][a] = dz[0][a] - iu * kx * uz[a];
                    omega[2][a] = iu * (kx * uy[a] - ky * ux[a]);
                }
            }
        }

        // energy, dissipation and wall terms
        let w = &basis.weights;
        let area = g.lx * g.ly;
        let mut e0 = 0.0;
        let mut grad = 0.0;
        for k in 0..g.nz {
            for ix in 0..g.nx {
                let kx2 = g.kx(ix).powi(2);
                for iy in 0..g.ny {
                    let k2 = kx2 + g.ky(iy).powi(2);
                    let a = g.index(k, ix, iy);
                    let s = ux[a].norm_sqr() + uy[a].norm_sqr() + uz[a].norm_sqr();
                    e0 += w[k] * s;
                    grad += w[k] * (k2 * s + dz[0][a].norm_sqr() + dz[1][a].norm_sqr() + dz[2][a].norm_sqr());
                }
            }
        }
        e0 *= area;
        grad *= area;
        let mut wall_sq = 0.0;
        for k in [0, g.nz - 1] {
            for c in 0..3 {
                for a in k * g.ncol()..(k + 1) * g.ncol() {
                    wall_sq += u.comps[c].data[a].norm_sqr();
                }
            }
        }
        wall_sq *= area;
        let nu = self.config.nu;
        let diss = 2.0 * nu * grad;
        let wall = 2.0 * nu * self.config.inv_zeta() * wall_sq;

        // physical products
        let mut phys: Vec<Vec<C64>> = u.comps.iter().map(|c| c.data.clone()).chain(omega).collect();
        for buf in phys.iter_mut() {
            fft_planes(&g, buf, false);
        }
        let re = |c: usize, a: usize| phys[c][a].re;
        let mut nonlinear: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::default(); len]);
        let mut cfl: f64 = 0.0;
        let dx = g.lx / g.nx as f64;
        let dy = g.ly / g.ny as f64;
        for k in 0..g.nz {
            for a in k * g.ncol()..(k + 1) * g.ncol() {
                let (u0, u1, u2) = (re(0, a), re(1, a), re(2, a));
                let (w0, w1, w2) = (re(3, a), re(4, a), re(5, a));
                nonlinear[0][a] = C64::new(u1 * w2 - u2 * w1, 0.0);
                nonlinear[1][a] = C64::new(u2 * w0 - u0 * w2, 0.0);
                nonlinear[2][a] = C64::new(u0 * w1 - u1 * w0, 0.0);
                cfl = cfl.max(u0.abs() / dx + u1.abs() / dy + u2.abs() / self.dz_local[k]);
            }
        }
        let mut p_nonlinear = vec![C64::default(); len];
        for c in 0..3 {
            fft_planes(&g, &mut nonlinear[c], true);
            mask(&g, &mut nonlinear[c]);
        }
        self.projector.project_buffers(&mut nonlinear, Some(&mut p_nonlinear));
        Derived { nonlinear, p_nonlinear, cfl: cfl * self.dt, diss, wall, e0 }
    }

    /// Advance one step. Returns the energy terms `(E0, diss, wall)` at the
    /// start of the step.
    pub fn step(&self, state: &mut SolverState) -> Result<(f64, f64, f64)> {
        let g = self.grid;
        let len = g.len();
        let dt = self.dt;
        let d = match state.cache.take() {
            Some((n, d)) if n == state.step_count => d,
            _ => self.derive(&state.u),
        };
        if !d.e0.is_finite() || !d.cfl.is_finite() {
            return Err(Error::NaNDetected { step: state.step_count });
        }
        if d.cfl > self.config.cfl_limit {
            return Err(Error::CflViolated { cfl: d.cfl, limit: self.config.cfl_limit });
        }
        let (c1, c0) = if state.prev_nonlinear.is_some() { (1.5, -0.5) } else { (1.0, 0.0) };
        let mut rhs: [Vec<C64>; 3] = std::array::from_fn(|c| {
            let mut v = state.u.comps[c].data.clone();
            for a in 0..len {
                v[a] += d.nonlinear[c][a] * (dt * c1);
            }
            if let Some(prev) = &state.prev_nonlinear {
                for a in 0..len {
                    v[a] += prev[c][a] * (dt * c0);
                }
            }
            v
        });

        if let Some(h) = &self.helmholtz {
            let basis = g.basis();
            let mut lap = vec![C64::default(); len];
            for c in 0..3 {
                apply_z(&g, &basis.d2t, &state.u.comps[c].data, &mut lap);
                let u = &state.u.comps[c].data;
                for k in 0..g.nz {
                    for ix in 0..g.nx {
                        let kx2 = g.kx(ix).powi(2);
                        for iy in 0..g.ny {
                            let a = g.index(k, ix, iy);
                            let k2 = kx2 + g.ky(iy).powi(2);
                            rhs[c][a] += (lap[a] - u[a] * k2) * h.alpha - state.pressure_gradient[c][a] * dt;
                        }
                    }
                }
            }
            self.solve_helmholtz(h, &mut rhs);
        }

        let before = rhs.clone();
        let mut phi = vec![C64::default(); len];
        self.projector.project_buffers(&mut rhs, Some(&mut phi));
        for c in 0..3 {
            for a in 0..len {
                state.pressure_gradient[c][a] += (before[c][a] - rhs[c][a]) / dt;
            }
        }
        for a in 0..len {
            state.pressure_increment[a] += phi[a] / dt;
        }
        let [ax, ay, az] = rhs;
        let mut u = SpectralField::from_components([
            SpectralScalar::from_data(g, ax),
            SpectralScalar::from_data(g, ay),
            SpectralScalar::from_data(g, az),
        ]);
        u.enforce_hermitian();
        u.dealias();
        let mut p = state.pressure_increment.clone();
        for a in 0..len {
            p[a] += d.p_nonlinear[a];
        }
        state.p = SpectralScalar::from_data(g, p);
        state.u = u;
        state.prev_nonlinear = Some(d.nonlinear);
        state.step_count += 1;
        state.t = state.step_count as f64 * dt;
        Ok((d.e0, d.diss, d.wall))
    }

    fn solve_helmholtz(&self, h: &Helmholtz, rhs: &mut [Vec<C64>; 3]) {
        let g = self.grid;
        let n = g.nz;
        let mut re = DVector::zeros(n);
        let mut im = DVector::zeros(n);
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                if !g.dealias_keep(ix, iy) || g.is_nyquist(ix, iy) {
                    for c in rhs.iter_mut() {
                        for k in 0..n {
                            c[g.index(k, ix, iy)] = C64::default();
                        }
                    }
                    continue;
                }
                let (robin, dirichlet) = &h.factors[&(abs_mode(ix, g.nx), abs_mode(iy, g.ny))];
                for (c, buf) in rhs.iter_mut().enumerate() {
                    for k in 0..n {
                        let v = buf[g.index(k, ix, iy)];
                        re[k] = v.re;
                        im[k] = v.im;
                    }
                    re[0] = 0.0;
                    im[0] = 0.0;
                    re[n - 1] = 0.0;
                    im[n - 1] = 0.0;
                    let lu = if c < 2 { robin } else { dirichlet };
                    lu.solve_mut(&mut re);
                    lu.solve_mut(&mut im);
                    for k in 0..n {
                        buf[g.index(k, ix, iy)] = C64::new(re[k], im[k]);
                    }
                }
            }
        }
    }

    /// `(E0, diss, wall)` of a field without stepping.
    pub fn energy_terms(&self, u: &SpectralField) -> (f64, f64, f64) {
        let d = self.derive(u);
        (d.e0, d.diss, d.wall)
    }

    /// `(E0, diss, wall)` of the current state; the work is reused by the
    /// next [`Stepper::step`] unless `state.u` is modified in between.
    pub fn state_energy_terms(&self, state: &mut SolverState) -> (f64, f64, f64) {
        let d = match state.cache.take() {
            Some((n, d)) if n == state.step_count => d,
            _ => self.derive(&state.u),
        };
        let out = (d.e0, d.diss, d.wall);
        state.cache = Some((state.step_count, d));
        out
    }
}

fn mask(g: &ChannelGrid, data: &mut [C64]) {
    for k in 0..g.nz {
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                if !g.dealias_keep(ix, iy) || g.is_nyquist(ix, iy) {
                    data[g.index(k, ix, iy)] = C64::default();
                }
            }
        }
    }
}

/// Build the initial state for a configuration.
pub fn init_state(config: &SimConfig) -> Result<SolverState> {
    Stepper::new(config)?.init_state()
}

/// One step with freshly built operators. Prefer [`Stepper::step`] in loops.
pub fn step(mut state: SolverState, config: &SimConfig) -> Result<SolverState> {
    Stepper::new(config)?.step(&mut state)?;
    Ok(state)
}

/// A saved point of a run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub u: SpectralField,
}

/// Integrate to `t_final`, calling `observe` at `t = 0`, every `save_every`
/// steps and at the final time. Energy rows are recorded at the same
/// points; the balance integral is accumulated every step by the
/// trapezoid rule.
pub fn run_observed(
    config: &SimConfig,
    mut observe: impl FnMut(&SolverState) -> Result<()>,
) -> Result<EnergyReport> {
    let stepper = Stepper::new(config)?;
    let mut state = stepper.init_state()?;
    let (steps, dt) = config.steps();
    let mut report = EnergyReport {
        r: config.r,
        nu: config.nu,
        zeta: config.zeta,
        dt,
        rows: Vec::new(),
        initial_navier_residual: if config.nu > 0.0 { stepper.navier_residual(&state.u) } else { 0.0 },
        max_divergence: 0.0,
        max_wall_normal: 0.0,
    };
    let (e_init, diss0, wall0) = stepper.state_energy_terms(&mut state);
    let mut integral = 0.0;
    let mut last_rate = diss0 + wall0;
    let record = |report: &mut EnergyReport, state: &SolverState, e0: f64, diss: f64, wall: f64, integral: f64| -> Result<()> {
        let er = state.u.iterated_curl(config.r)?.l2_norm_sq();
        let norm = state.u.l2_norm().max(1e-300);
        report.max_divergence = report.max_divergence.max(state.u.divergence().max_abs() / norm);
        report.max_wall_normal = report.max_wall_normal.max(state.u.wall_normal_max() / norm);
        report.rows.push(EnergyRow { t: state.t, e0, diss, wall, er, balance_residual: e0 + integral - e_init });
        Ok(())
    };
    record(&mut report, &state, e_init, diss0, wall0, 0.0)?;
    observe(&state)?;
    for n in 1..=steps {
        stepper.step(&mut state)?;
        // energy terms at the new time level
        let (e0, diss, wall) = stepper.state_energy_terms(&mut state);
        if !e0.is_finite() {
            return Err(Error::NaNDetected { step: n });
        }
        let rate = diss + wall;
        integral += 0.5 * dt * (last_rate + rate);
        last_rate = rate;
        if n % config.save_every == 0 || n == steps {
            record(&mut report, &state, e0, diss, wall, integral)?;
            observe(&state)?;
        }
    }
    Ok(report)
}

/// Integrate and keep every saved field.
pub fn run(config: &SimConfig) -> Result<(Vec<Snapshot>, EnergyReport)> {
    let mut traj = Vec::new();
    let report = run_observed(config, |s| {
        traj.push(Snapshot { t: s.t, step: s.step_count, u: s.u.clone() });
        Ok(())
    })?;
    Ok((traj, report))
}

/// Largest `|E0(t) + int (diss + wall) - E0(0)| / E0(0)` over save points.
pub fn energy_balance_check(report: &EnergyReport) -> IdentityReport {
    let e_init = report.rows.first().map(|r| r.e0).unwrap_or(0.0);
    let worst = report
        .rows
        .iter()
        .max_by(|a, b| a.balance_residual.abs().total_cmp(&b.balance_residual.abs()));
    let (lhs, residual) = match worst {
        Some(row) => (row.balance_residual + e_init, row.balance_residual.abs()),
        None => (0.0, 0.0),
    };
    let mut rep = IdentityReport::new("energy_balance", lhs, e_init, format!("dt = {}", report.dt));
    rep.abs_residual = residual;
    rep.rel_residual = if e_init > 0.0 { residual / e_init } else { residual };
    rep
}

/// `(1/M) ln(1 + 1/(eta + E_r(0)))`.
pub fn tstar_estimate(er0: f64, m: f64, eta: f64) -> Result<f64> {
    if !(er0 >= 0.0) || er0.is_nan() {
        return Err(Error::DomainError(format!("E_r(0) must be >= 0, got {er0}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::DomainError(format!("M must be positive, got {m}")));
    }
    if !(eta > 0.0) {
        return Err(Error::DomainError(format!("eta must be positive, got {eta}")));
    }
    Ok((1.0 / (eta + er0)).ln_1p() / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    /// Smallest `M >= 0` with `E' <= M (E + E^2)` at every interior point.
    pub m_fit: f64,
    /// Fraction of interior points violating the inequality for `m_test`.
    pub violation_fraction: f64,
    pub points: usize,
}

/// Check `E' <= M E + M E^2` on a sampled series with second-order
/// finite differences on the (possibly nonuniform) time grid, restricted
/// to `window = (t0, t1)` when given.
pub fn differential_inequality_audit(
    times: &[f64],
    values: &[f64],
    window: Option<(f64, f64)>,
    m_test: f64,
) -> Result<AuditResult> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| window.is_none_or(|(a, b)| **t >= a && **t <= b))
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 3 {
        return Err(Error::SeriesTooShort(pts.len()));
    }
    let mut m_fit: f64 = 0.0;
    let mut violations = 0;
    let interior = pts.len() - 2;
    for i in 1..pts.len() - 1 {
        let (t0, e0) = pts[i - 1];
        let (t1, e1) = pts[i];
        let (t2, e2) = pts[i + 1];
        let h1 = t1 - t0;
        let h2 = t2 - t1;
        let de = h1 / (h2 * (h1 + h2)) * (e2 - e1) + h2 / (h1 * (h1 + h2)) * (e1 - e0);
        let bound = e1 + e1 * e1;
        if bound > 0.0 {
            m_fit = m_fit.max(de / bound);
        }
        if de > m_test * bound + 1e-12 * de.abs() {
            violations += 1;
        }
    }
    Ok(AuditResult { m_fit: m_fit.max(0.0), violation_fraction: violations as f64 / interior as f64, points: interior })
}

/// [`differential_inequality_audit`] on the `E_r` column of a report.
pub fn audit_report(report: &EnergyReport, window: Option<(f64, f64)>, m_test: f64) -> Result<AuditResult> {
    differential_inequality_audit(&report.times(), &report.er_series(), window, m_test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::analytic::{channel_robin_mode, robin_even_root, taylor_green};
    use crate::geometry::Vec3;

    fn robin_config(nz: usize, dt: f64, t_final: f64) -> SimConfig {
        let mut c = SimConfig::new(ChannelGrid::periodic_2pi(4, 4, nz), InitialData::Analytic(channel_robin_mode(1.0)));
        c.nu = 0.1;
        c.zeta = 1.0;
        c.dt = dt;
        c.t_final = t_final;
        c.save_every = 100;
        c
    }

    #[test]
    fn robin_mode_one_step() {
        let cfg = robin_config(33, 1e-3, 1e-3);
        let (traj, _) = run(&cfg).unwrap();
        let l = robin_even_root(1.0);
        let decay = (-cfg.nu * l * l * 1e-3).exp();
        let exact = SpectralField::from_analytic(cfg.grid, &channel_robin_mode(1.0)).scale(decay);
        let err = traj.last().unwrap().u.sub(&exact).max_norm();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut cfg = SimConfig::new(ChannelGrid::periodic_2pi(8, 8, 17), InitialData::catalog("zero"));
        cfg.nu = 0.01;
        cfg.t_final = 0.01;
        let (traj, report) = run(&cfg).unwrap();
        assert_eq!(traj.last().unwrap().u.max_norm(), 0.0);
        assert_eq!(energy_balance_check(&report).abs_residual, 0.0);
    }

    #[test]
    fn taylor_green_decays_at_viscous_rate() {
        // (sin x cos y, -cos x sin y, 0) is an exact solution with free-slip
        // walls; the nonlinear term is a pure gradient
        let mut cfg = SimConfig::new(ChannelGrid::periodic_2pi(16, 16, 9), InitialData::Analytic(taylor_green()));
        cfg.nu = 0.05;
        cfg.zeta = f64::INFINITY;
        cfg.dt = 1e-3;
        cfg.t_final = 0.2;
        let (traj, _) = run(&cfg).unwrap();
        let exact = SpectralField::from_analytic(cfg.grid, &taylor_green()).scale((-2.0 * cfg.nu * 0.2).exp());
        let err = traj.last().unwrap().u.sub(&exact).max_norm();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn projection_invariants_hold_along_a_run() {
        let mut cfg = SimConfig::new(ChannelGrid::periodic_2pi(8, 8, 17), InitialData::catalog("sheared_robin"));
        cfg.nu = 0.01;
        cfg.t_final = 0.02;
        cfg.save_every = 5;
        let (_, report) = run(&cfg).unwrap();
        assert!(report.max_divergence < 1e-8);
        assert!(report.max_wall_normal < 1e-8);
        assert!(report.initial_navier_residual < 1e-10);
        for w in report.rows.windows(2) {
            assert!(w[1].e0 <= w[0].e0);
        }
    }

    #[test]
    fn cfl_is_checked() {
        let mut cfg = SimConfig::new(ChannelGrid::periodic_2pi(8, 8, 17), InitialData::Analytic(taylor_green().scale(1e4)));
        cfg.dt = 1e-2;
        assert!(matches!(init_state(&cfg), Err(Error::CflViolated { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = robin_config(17, 1e-3, 1.0);
        cfg.zeta = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::NonpositiveSlipLength(_))));
        cfg.zeta = 1.0;
        cfg.dt = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn tstar_examples() {
        assert!((tstar_estimate(0.5, 1.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((tstar_estimate(0.9, 2.0, 0.1).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(tstar_estimate(1e300, 1.0, 1.0).unwrap() < 1e-299);
        assert!(matches!(tstar_estimate(1.0, 0.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(tstar_estimate(-1.0, 1.0, 1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn audit_examples() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        // E' = E + E^2, E(0) = 0.1: E = 1 / (11 e^{-t} - 1)
        let e: Vec<f64> = t.iter().map(|t| 1.0 / (11.0 * (-t).exp() - 1.0)).collect();
        let a = differential_inequality_audit(&t, &e, None, 1.0 + 1e-3).unwrap();
        assert!((a.m_fit - 1.0).abs() < 1e-3, "{}", a.m_fit);
        assert_eq!(a.violation_fraction, 0.0);
        let c = differential_inequality_audit(&t, &vec![2.0; t.len()], None, 1.0).unwrap();
        assert_eq!(c.m_fit, 0.0);
        let d: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let a = differential_inequality_audit(&t, &d, Some((0.2, 0.8)), 1e-6).unwrap();
        assert_eq!(a.violation_fraction, 0.0);
        assert!(matches!(differential_inequality_audit(&t[..2], &e[..2], None, 1.0), Err(Error::SeriesTooShort(2))));
    }

    #[test]
    fn state_from_field_starts_at_zero_time() {
        let g = ChannelGrid::periodic_2pi(4, 4, 9);
        let s = SolverState::from_field(SpectralField::from_fn(g, |_| Vec3::zeros()));
        assert_eq!((s.t, s.step_count), (0.0, 0));
    }
}
