//! Fourier × Fourier × Chebyshev fields on the periodic channel
//! `[0, Lx) × [0, Ly) × [-1, 1]`.
//!
//! Data are stored as Fourier coefficients in `x, y` and values at the
//! Chebyshev–Gauss–Lobatto nodes in `z` (the first node is the upper wall
//! `z = +1`). Chebyshev coefficients are available through
//! [`SpectralScalar::chebyshev_coeffs`]; derivatives in `z` use the
//! collocation matrix, which is the same operator as the coefficient
//! recurrence.
//!
//! Layout of every scalar buffer: `data[(k * nx + ix) * ny + iy]`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::analytic::AnalyticField;
use super::chebyshev::ChebyshevBasis;
use super::SobolevNorm;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub type C64 = Complex64;
const I: C64 = C64::new(0.0, 1.0);

/// Resolution and periods of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
}

impl ChannelGrid {
    pub fn new(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 || nz < 5 {
            return Err(Error::ConfigInvalid(format!("grid {nx}x{ny}x{nz} too small (need nx, ny >= 2, nz >= 5)")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::ConfigInvalid(format!("periods must be positive, got {lx}, {ly}")));
        }
        Ok(ChannelGrid { nx, ny, nz, lx, ly })
    }

    /// `2 pi` periodic in both horizontal directions.
    pub fn periodic_2pi(nx: usize, ny: usize, nz: usize) -> Self {
        ChannelGrid::new(nx, ny, nz, TAU, TAU).expect("valid grid")
    }

    pub fn ncol(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, k: usize, ix: usize, iy: usize) -> usize {
        (k * self.nx + ix) * self.ny + iy
    }

    pub fn basis(&self) -> Arc<ChebyshevBasis> {
        ChebyshevBasis::cached(self.nz)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lx * i as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.ly * j as f64 / self.ny as f64
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        self.basis().nodes.clone()
    }

    /// Signed Fourier mode number of index `i` out of `n`.
    pub fn signed_mode(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    fn is_nyquist_index(i: usize, n: usize) -> bool {
        n % 2 == 0 && i == n / 2
    }

    pub fn kx(&self, ix: usize) -> f64 {
        if Self::is_nyquist_index(ix, self.nx) {
            0.0
        } else {
            TAU * Self::signed_mode(ix, self.nx) as f64 / self.lx
        }
    }

    pub fn ky(&self, iy: usize) -> f64 {
        if Self::is_nyquist_index(iy, self.ny) {
            0.0
        } else {
            TAU * Self::signed_mode(iy, self.ny) as f64 / self.ly
        }
    }

    pub fn is_nyquist(&self, ix: usize, iy: usize) -> bool {
        Self::is_nyquist_index(ix, self.nx) || Self::is_nyquist_index(iy, self.ny)
    }

    /// 2/3-rule: keep `|m| < n/3` in both horizontal directions.
    pub fn dealias_keep(&self, ix: usize, iy: usize) -> bool {
        let mx = Self::signed_mode(ix, self.nx).unsigned_abs() as usize;
        let my = Self::signed_mode(iy, self.ny).unsigned_abs() as usize;
        3 * mx < self.nx && 3 * my < self.ny
    }

    pub fn volume(&self) -> f64 {
        2.0 * self.lx * self.ly
    }

    /// Index of the mode `-m` given the index of `m`.
    fn conj_index(i: usize, n: usize) -> usize {
        (n - i) % n
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static PLANS: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut p = planner().lock().expect("fft planner poisoned");
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        })
        .clone()
}

/// In-place 2-D transform of every `z` plane. Forward transforms are
/// normalized by `1 / (nx ny)`.
pub(crate) fn fft_planes(grid: &ChannelGrid, data: &mut [C64], forward: bool) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (fy, fx) = if forward {
        (plans(ny).0, plans(nx).0)
    } else {
        (plans(ny).1, plans(nx).1)
    };
    let mut scratch = vec![C64::default(); nx * ny];
    for plane in data.chunks_mut(nx * ny) {
        fy.process(plane);
        for ix in 0..nx {
            for iy in 0..ny {
                scratch[iy * nx + ix] = plane[ix * ny + iy];
            }
        }
        fx.process(&mut scratch);
        let scale = if forward { 1.0 / (nx * ny) as f64 } else { 1.0 };
        for ix in 0..nx {
            for iy in 0..ny {
                plane[ix * ny + iy] = scratch[iy * nx + ix] * scale;
            }
        }
    }
}

/// `dst = src · Mᵀ` along the `z` index, with `mt` holding `Mᵀ`.
pub(crate) fn apply_z(grid: &ChannelGrid, mt: &DMatrix<f64>, src: &[C64], dst: &mut [C64]) {
    let rows = 2 * grid.ncol();
    let s: &[f64] = bytemuck::cast_slice(src);
    let d: &mut [f64] = bytemuck::cast_slice_mut(dst);
    let a = DMatrixView::from_slice(s, rows, grid.nz);
    let mut out = DMatrixViewMut::from_slice(d, rows, grid.nz);
    out.gemm(1.0, &a, mt, 0.0);
}

/// A real scalar field on the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalar {
    pub grid: ChannelGrid,
    pub(crate) data: Vec<C64>,
}

impl SpectralScalar {
    pub fn zeros(grid: ChannelGrid) -> Self {
        SpectralScalar { grid, data: vec![C64::default(); grid.len()] }
    }

    pub(crate) fn from_data(grid: ChannelGrid, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        SpectralScalar { grid, data }
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// From physical grid values stored x-fastest:
    /// `values[i + nx * (j + ny * k)]`.
    pub fn from_grid_values(grid: ChannelGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::TruncatedPayload { expected: grid.len(), found: values.len() });
        }
        let mut data = vec![C64::default(); grid.len()];
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    data[grid.index(k, i, j)] = C64::new(values[i + grid.nx * (j + grid.ny * k)], 0.0);
                }
            }
        }
        fft_planes(&grid, &mut data, true);
        let mut s = SpectralScalar { grid, data };
        s.enforce_hermitian();
        Ok(s)
    }

    pub fn from_fn(grid: ChannelGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let z = grid.z_nodes();
        let mut values = vec![0.0; grid.len()];
        for (k, &zk) in z.iter().enumerate() {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    values[i + grid.nx * (j + grid.ny * k)] = f(grid.x(i), grid.y(j), zk);
                }
            }
        }
        SpectralScalar::from_grid_values(grid, &values).expect("sized by grid")
    }

    /// Physical values, x-fastest.
    pub fn to_grid_values(&self) -> Vec<f64> {
        let g = self.grid;
        let mut data = self.data.clone();
        fft_planes(&g, &mut data, false);
        let mut out = vec![0.0; g.len()];
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    out[i + g.nx * (j + g.ny * k)] = data[g.index(k, i, j)].re;
                }
            }
        }
        out
    }

    /// Chebyshev coefficients, laid out `[(ix * ny + iy) * nz + kz]`.
    pub fn chebyshev_coeffs(&self) -> Vec<C64> {
        let g = self.grid;
        let mut tmp = vec![C64::default(); g.len()];
        apply_z(&g, &g.basis().to_coeffs_t, &self.data, &mut tmp);
        let mut out = vec![C64::default(); g.len()];
        for k in 0..g.nz {
            for c in 0..g.ncol() {
                out[c * g.nz + k] = tmp[k * g.ncol() + c];
            }
        }
        out
    }

    /// Inverse of [`SpectralScalar::chebyshev_coeffs`].
    pub fn from_chebyshev_coeffs(grid: ChannelGrid, coeffs: &[C64]) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::TruncatedPayload { expected: grid.len(), found: coeffs.len() });
        }
        let mut tmp = vec![C64::default(); grid.len()];
        for k in 0..grid.nz {
            for c in 0..grid.ncol() {
                tmp[k * grid.ncol() + c] = coeffs[c * grid.nz + k];
            }
        }
        let mut data = vec![C64::default(); grid.len()];
        apply_z(&grid, &grid.basis().to_nodal_t, &tmp, &mut data);
        Ok(SpectralScalar { grid, data })
    }

    /// Values along `z` of Fourier mode `(ix, iy)`.
    pub fn mode_profile(&self, ix: usize, iy: usize) -> Vec<C64> {
        (0..self.grid.nz).map(|k| self.data[self.grid.index(k, ix, iy)]).collect()
    }

    fn horizontal_multiplier(&self, f: impl Fn(usize, usize) -> C64) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for k in 0..g.nz {
            for ix in 0..g.nx {
                for iy in 0..g.ny {
                    out.data[g.index(k, ix, iy)] *= f(ix, iy);
                }
            }
        }
        out
    }

    pub fn dx(&self) -> Self {
        let g = self.grid;
        self.horizontal_multiplier(|ix, _| I * g.kx(ix))
    }

    pub fn dy(&self) -> Self {
        let g = self.grid;
        self.horizontal_multiplier(|_, iy| I * g.ky(iy))
    }

    pub fn dz(&self) -> Self {
        let mut out = Self::zeros(self.grid);
        apply_z(&self.grid, &self.grid.basis().d1t, &self.data, &mut out.data);
        out
    }

    pub fn dz2(&self) -> Self {
        let mut out = Self::zeros(self.grid);
        apply_z(&self.grid, &self.grid.basis().d2t, &self.data, &mut out.data);
        out
    }

    pub fn derivative(&self, axis: usize) -> Self {
        match axis {
            0 => self.dx(),
            1 => self.dy(),
            _ => self.dz(),
        }
    }

    /// Make the coefficients exactly those of a real field and clear the
    /// Nyquist modes.
    pub fn enforce_hermitian(&mut self) {
        let g = self.grid;
        for k in 0..g.nz {
            for ix in 0..g.nx {
                for iy in 0..g.ny {
                    let a = g.index(k, ix, iy);
                    if g.is_nyquist(ix, iy) {
                        self.data[a] = C64::default();
                        continue;
                    }
                    let b = g.index(k, ChannelGrid::conj_index(ix, g.nx), ChannelGrid::conj_index(iy, g.ny));
                    if b < a {
                        continue;
                    }
                    let avg = 0.5 * (self.data[a] + self.data[b].conj());
                    self.data[a] = avg;
                    self.data[b] = avg.conj();
                }
            }
        }
    }

    pub fn dealias(&mut self) {
        let g = self.grid;
        for k in 0..g.nz {
            for ix in 0..g.nx {
                for iy in 0..g.ny {
                    if !g.dealias_keep(ix, iy) {
                        self.data[g.index(k, ix, iy)] = C64::default();
                    }
                }
            }
        }
    }

    /// `sum over modes and nodes of w_k f(|kx|^2, |ky|^2) conj(a) b`, times
    /// the horizontal area.
    fn weighted_inner(&self, other: &Self, weight: impl Fn(f64, f64) -> f64) -> f64 {
        let g = self.grid;
        let basis = g.basis();
        let mut total = 0.0;
        for k in 0..g.nz {
            let wk = basis.weights[k];
            for ix in 0..g.nx {
                let kx2 = g.kx(ix).powi(2);
                for iy in 0..g.ny {
                    let a = g.index(k, ix, iy);
                    total += wk * weight(kx2, g.ky(iy).powi(2)) * (self.data[a].conj() * other.data[a]).re;
                }
            }
        }
        total * g.lx * g.ly
    }

    /// L² inner product (Parseval in `x, y`, Clenshaw–Curtis in `z`).
    pub fn inner(&self, other: &Self) -> f64 {
        self.weighted_inner(other, |_, _| 1.0)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// L² norm squared by quadrature on the physical grid.
    pub fn l2_norm_sq_grid(&self) -> f64 {
        let g = self.grid;
        let v = self.to_grid_values();
        let w = g.basis().weights.clone();
        let cell = g.lx * g.ly / g.ncol() as f64;
        let mut total = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let plane = &v[k * g.ncol()..(k + 1) * g.ncol()];
            total += wk * plane.iter().map(|x| x * x).sum::<f64>();
        }
        total * cell
    }

    pub fn max_abs(&self) -> f64 {
        self.to_grid_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `|| d_x^a d_y^b w ||^2` for every `a + b <= order`, summed by
    /// total order, where `w` is this scalar.
    fn horizontal_breakdown(&self, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        for (a, slot) in out.iter_mut().enumerate() {
            for b in 0..=a {
                let c = a - b;
                *slot += self.weighted_inner(self, |kx2, ky2| kx2.powi(b as i32) * ky2.powi(c as i32));
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        SpectralScalar { grid: self.grid, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += v * a;
        }
    }
}

/// A real vector field on the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: ChannelGrid,
    pub comps: [SpectralScalar; 3],
}

impl SpectralField {
    pub fn zeros(grid: ChannelGrid) -> Self {
        SpectralField { grid, comps: std::array::from_fn(|_| SpectralScalar::zeros(grid)) }
    }

    pub fn from_components(comps: [SpectralScalar; 3]) -> Self {
        SpectralField { grid: comps[0].grid, comps }
    }

    pub fn from_fn(grid: ChannelGrid, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let z = grid.z_nodes();
        let mut values = vec![vec![0.0; grid.len()]; 3];
        for (k, &zk) in z.iter().enumerate() {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let v = f(&Vec3::new(grid.x(i), grid.y(j), zk));
                    let a = i + grid.nx * (j + grid.ny * k);
                    for c in 0..3 {
                        values[c][a] = v[c];
                    }
                }
            }
        }
        SpectralField::from_components(std::array::from_fn(|c| {
            SpectralScalar::from_grid_values(grid, &values[c]).expect("sized by grid")
        }))
    }

    pub fn from_analytic(grid: ChannelGrid, u: &AnalyticField) -> Self {
        SpectralField::from_fn(grid, |x| u.value(x))
    }

    /// Component-major, x-fastest physical values (`3 nx ny nz` entries).
    pub fn to_grid_values(&self) -> Vec<f64> {
        self.comps.iter().flat_map(|c| c.to_grid_values()).collect()
    }

    pub fn from_grid_values(grid: ChannelGrid, values: &[f64]) -> Result<Self> {
        let n = grid.len();
        if values.len() != 3 * n {
            return Err(Error::TruncatedPayload { expected: 3 * n, found: values.len() });
        }
        let comps: Result<Vec<SpectralScalar>> =
            (0..3).map(|c| SpectralScalar::from_grid_values(grid, &values[c * n..(c + 1) * n])).collect();
        let comps = comps?;
        let [a, b, c]: [SpectralScalar; 3] = comps.try_into().expect("three components");
        Ok(SpectralField::from_components([a, b, c]))
    }

    /// Chebyshev coefficient tensor of shape `(3, nx, ny, nz)`, flattened
    /// row-major.
    pub fn chebyshev_coeffs(&self) -> Vec<C64> {
        self.comps.iter().flat_map(|c| c.chebyshev_coeffs()).collect()
    }

    /// Value at an arbitrary point, by direct summation of the series.
    pub fn evaluate(&self, x: &Vec3) -> Vec3 {
        let g = self.grid;
        let mut out = Vec3::zeros();
        for (c, comp) in self.comps.iter().enumerate() {
            let coeffs = comp.chebyshev_coeffs();
            let mut total = 0.0;
            for ix in 0..g.nx {
                for iy in 0..g.ny {
                    let col = ix * g.ny + iy;
                    let re: Vec<f64> = coeffs[col * g.nz..(col + 1) * g.nz].iter().map(|v| v.re).collect();
                    let im: Vec<f64> = coeffs[col * g.nz..(col + 1) * g.nz].iter().map(|v| v.im).collect();
                    let amp = C64::new(ChebyshevBasis::evaluate(&re, x.z), ChebyshevBasis::evaluate(&im, x.z));
                    let phase = g.kx(ix) * x.x + g.ky(iy) * x.y;
                    total += (amp * C64::from_polar(1.0, phase)).re;
                }
            }
            out[c] = total;
        }
        out
    }

    pub fn curl(&self) -> Self {
        let [u, v, w] = &self.comps;
        let mut cx = w.dy();
        cx.axpy(-1.0, &v.dz());
        let mut cy = u.dz();
        cy.axpy(-1.0, &w.dx());
        let mut cz = v.dx();
        cz.axpy(-1.0, &u.dy());
        SpectralField::from_components([cx, cy, cz])
    }

    /// Largest iterated-curl order resolved on this grid.
    pub fn max_curl_order(&self) -> usize {
        self.grid.nz / 4
    }

    pub fn iterated_curl(&self, r: usize) -> Result<Self> {
        let max = self.max_curl_order();
        if r > max {
            return Err(Error::OrderTooHigh { requested: r, max });
        }
        let mut out = self.clone();
        for _ in 0..r {
            out = out.curl();
        }
        Ok(out)
    }

    pub fn divergence(&self) -> SpectralScalar {
        let mut d = self.comps[0].dx();
        d.axpy(1.0, &self.comps[1].dy());
        d.axpy(1.0, &self.comps[2].dz());
        d
    }

    /// `G[i][j] = d u_i / d x_j`.
    pub fn gradient(&self) -> [[SpectralScalar; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.comps[i].derivative(j)))
    }

    /// `-Laplacian`, componentwise.
    pub fn neg_laplacian(&self) -> Self {
        SpectralField::from_components(std::array::from_fn(|c| {
            let s = &self.comps[c];
            let mut out = s.dx().dx();
            out.axpy(1.0, &s.dy().dy());
            out.axpy(1.0, &s.dz2());
            out.scale(-1.0)
        }))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        (0..3).map(|c| self.comps[c].inner(&other.comps[c])).sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq_grid(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_norm_sq_grid()).sum()
    }

    /// Largest pointwise Euclidean norm on the collocation grid.
    pub fn max_norm(&self) -> f64 {
        let v = self.to_grid_values();
        let n = self.grid.len();
        (0..n)
            .map(|a| (v[a].powi(2) + v[n + a].powi(2) + v[2 * n + a].powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest |u_z| on the two walls.
    pub fn wall_normal_max(&self) -> f64 {
        let g = self.grid;
        let v = self.comps[2].to_grid_values();
        let top = &v[..g.ncol()];
        let bottom = &v[(g.nz - 1) * g.ncol()..];
        top.iter().chain(bottom).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        SpectralField::from_components(std::array::from_fn(|i| self.comps[i].scale(c)))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for c in 0..3 {
            self.comps[c].axpy(a, &x.comps[c]);
        }
    }

    pub fn dealias(&mut self) {
        for c in &mut self.comps {
            c.dealias();
        }
    }

    pub fn enforce_hermitian(&mut self) {
        for c in &mut self.comps {
            c.enforce_hermitian();
        }
    }

    /// Full H^r norm `sum_{|alpha| <= r} || d^alpha u ||^2`, with each
    /// multi-index counted once, plus the curl variant
    /// `sum_{l <= r} || curl^l u ||^2`.
    pub fn sobolev_norm(&self, r: usize) -> Result<SobolevNorm> {
        let max = self.max_curl_order();
        if r > max {
            return Err(Error::OrderTooHigh { requested: r, max });
        }
        let mut breakdown = vec![0.0; r + 1];
        for comp in &self.comps {
            let mut dzc = comp.clone();
            for c in 0..=r {
                let h = dzc.horizontal_breakdown(r - c);
                for (ab, v) in h.iter().enumerate() {
                    breakdown[ab + c] += v;
                }
                if c < r {
                    dzc = dzc.dz();
                }
            }
        }
        let mut curl_breakdown = Vec::with_capacity(r + 1);
        let mut q = self.clone();
        for l in 0..=r {
            curl_breakdown.push(q.l2_norm_sq());
            if l < r {
                q = q.curl();
            }
        }
        Ok(SobolevNorm::new(r, breakdown, curl_breakdown))
    }

    /// Sup-norm of the full gradient difference on the grid,
    /// `max |grad u|` with the Frobenius norm at each node.
    pub fn gradient_max_norm(&self) -> f64 {
        let grads = self.gradient();
        let vals: Vec<Vec<f64>> = grads.iter().flatten().map(|s| s.to_grid_values()).collect();
        (0..self.grid.len())
            .map(|a| vals.iter().map(|v| v[a] * v[a]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Discrete Leray projection: the orthogonal projection, in the
/// quadrature inner product, onto fields whose collocation divergence
/// vanishes at every node and whose wall-normal component vanishes on
/// both walls.
///
/// Per Fourier mode the constraint operator `C` maps a velocity column to
/// its nodal divergence and the two wall values of `u_z`; the projection
/// is `u - W⁻¹ Cᴴ (C W⁻¹ Cᴴ)⁻¹ C u`. The Gram matrix only depends on
/// `|kx|, |ky|`, so one Cholesky factor per pair is stored.
#[derive(Debug, Clone)]
pub struct LerayProjector {
    grid: ChannelGrid,
    basis: Arc<ChebyshevBasis>,
    factors: HashMap<(usize, usize), nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

fn abs_mode(i: usize, n: usize) -> usize {
    ChannelGrid::signed_mode(i, n).unsigned_abs() as usize
}

impl LerayProjector {
    pub fn new(grid: ChannelGrid) -> Result<Self> {
        let basis = grid.basis();
        let n = grid.nz;
        let winv: Vec<f64> = basis.weights.iter().map(|w| 1.0 / w).collect();
        let d = &basis.d1;
        let mut ddt = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                ddt[(i, j)] = (0..n).map(|k| d[(i, k)] * winv[k] * d[(j, k)]).sum();
            }
        }
        let mut factors = HashMap::new();
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                if grid.is_nyquist(ix, iy) {
                    continue;
                }
                let key = (abs_mode(ix, grid.nx), abs_mode(iy, grid.ny));
                if key == (0, 0) || factors.contains_key(&key) {
                    continue;
                }
                let k2 = grid.kx(ix).powi(2) + grid.ky(iy).powi(2);
                let mut s = DMatrix::zeros(n + 2, n + 2);
                s.view_mut((0, 0), (n, n)).copy_from(&ddt);
                for i in 0..n {
                    s[(i, i)] += k2 * winv[i];
                    s[(i, n)] = d[(i, 0)] * winv[0];
                    s[(n, i)] = s[(i, n)];
                    s[(i, n + 1)] = d[(i, n - 1)] * winv[n - 1];
                    s[(n + 1, i)] = s[(i, n + 1)];
                }
                s[(n, n)] = winv[0];
                s[(n + 1, n + 1)] = winv[n - 1];
                let chol = nalgebra::Cholesky::new(s).ok_or(Error::SingularMode {
                    mx: ChannelGrid::signed_mode(ix, grid.nx),
                    my: ChannelGrid::signed_mode(iy, grid.ny),
                })?;
                factors.insert(key, chol);
            }
        }
        Ok(LerayProjector { grid, basis, factors })
    }

    pub fn grid(&self) -> &ChannelGrid {
        &self.grid
    }

    /// Project three component buffers in place; returns the nodal
    /// pressure-like potential `p` with `u_in - P u_in = grad p` (up to the
    /// quadrature weighting).
    pub(crate) fn project_buffers(&self, u: &mut [Vec<C64>; 3], mut pressure: Option<&mut Vec<C64>>) {
        let g = self.grid;
        let n = g.nz;
        let w = &self.basis.weights;
        let d = &self.basis.d1;
        let mut ux = vec![C64::default(); n];
        let mut uy = vec![C64::default(); n];
        let mut uz = vec![C64::default(); n];
        let mut rhs_re = DVector::zeros(n + 2);
        let mut rhs_im = DVector::zeros(n + 2);
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let idx = |k: usize| g.index(k, ix, iy);
                if g.is_nyquist(ix, iy) {
                    for k in 0..n {
                        for c in u.iter_mut() {
                            c[idx(k)] = C64::default();
                        }
                    }
                    continue;
                }
                let key = (abs_mode(ix, g.nx), abs_mode(iy, g.ny));
                if key == (0, 0) {
                    for k in 0..n {
                        u[2][idx(k)] = C64::default();
                    }
                    if let Some(p) = pressure.as_deref_mut() {
                        for k in 0..n {
                            p[idx(k)] = C64::default();
                        }
                    }
                    continue;
                }
                let mut nonzero = false;
                for k in 0..n {
                    ux[k] = u[0][idx(k)];
                    uy[k] = u[1][idx(k)];
                    uz[k] = u[2][idx(k)];
                    nonzero |= ux[k] != C64::default() || uy[k] != C64::default() || uz[k] != C64::default();
                }
                if !nonzero {
                    if let Some(p) = pressure.as_deref_mut() {
                        for k in 0..n {
                            p[idx(k)] = C64::default();
                        }
                    }
                    continue;
                }
                let (kx, ky) = (g.kx(ix), g.ky(iy));
                for i in 0..n {
                    let mut r = I * (kx * ux[i] + ky * uy[i]);
                    for j in 0..n {
                        r += d[(i, j)] * uz[j];
                    }
                    rhs_re[i] = r.re;
                    rhs_im[i] = r.im;
                }
                rhs_re[n] = uz[0].re;
                rhs_im[n] = uz[0].im;
                rhs_re[n + 1] = uz[n - 1].re;
                rhs_im[n + 1] = uz[n - 1].im;
                let chol = &self.factors[&key];
                chol.solve_mut(&mut rhs_re);
                chol.solve_mut(&mut rhs_im);
                let lam = |i: usize| C64::new(rhs_re[i], rhs_im[i]);
                for k in 0..n {
                    let l = lam(k) / w[k];
                    u[0][idx(k)] = ux[k] + I * kx * l;
                    u[1][idx(k)] = uy[k] + I * ky * l;
                    let mut dt = C64::default();
                    for i in 0..n {
                        dt += d[(i, k)] * lam(i);
                    }
                    if k == 0 {
                        dt += lam(n);
                    }
                    if k == n - 1 {
                        dt += lam(n + 1);
                    }
                    u[2][idx(k)] = uz[k] - dt / w[k];
                    if let Some(p) = pressure.as_deref_mut() {
                        p[idx(k)] = -l;
                    }
                }
            }
        }
    }

    pub fn project(&self, u: &SpectralField) -> SpectralField {
        self.project_with_pressure(u).0
    }

    pub fn project_with_pressure(&self, u: &SpectralField) -> (SpectralField, SpectralScalar) {
        let mut bufs: [Vec<C64>; 3] = std::array::from_fn(|c| u.comps[c].data.clone());
        let mut p = vec![C64::default(); self.grid.len()];
        self.project_buffers(&mut bufs, Some(&mut p));
        let [a, b, c] = bufs;
        let g = self.grid;
        (
            SpectralField::from_components([
                SpectralScalar::from_data(g, a),
                SpectralScalar::from_data(g, b),
                SpectralScalar::from_data(g, c),
            ]),
            SpectralScalar::from_data(g, p),
        )
    }
}

/// One-shot Leray projection (builds the per-mode factors each call; keep
/// a [`LerayProjector`] around when projecting repeatedly).
pub fn leray_project(u: &SpectralField) -> Result<SpectralField> {
    Ok(LerayProjector::new(u.grid)?.project(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::analytic::channel_robin_mode;
    use crate::field::expr::Expr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// curl of `(1 - z^2) a` for a periodic potential `a`: solenoidal with
    /// `u_z = 0` on the walls.
    fn periodic_solenoidal() -> AnalyticField {
        let wall = &Expr::constant(1.0) - &Expr::monomial([0, 0, 2]);
        let a = [
            &Expr::sin(0, 1.0) * &Expr::cos(1, 1.0),
            &Expr::cos(0, 2.0) * &Expr::monomial([0, 0, 1]),
            &Expr::sin(1, 1.0) * &Expr::exp(2, 0.5),
        ];
        AnalyticField::new("potential", a.map(|e| &wall * &e)).curl()
    }

    fn grid() -> ChannelGrid {
        ChannelGrid::periodic_2pi(12, 10, 17)
    }

    fn random_field(g: ChannelGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        SpectralField::from_fn(g, |p| {
            let (x, y, z) = (p.x, p.y, p.z);
            Vec3::new(
                c[0] * (x + c[1]).sin() * (1.0 + c[2] * z * z) + c[3] * (2.0 * y).cos() * z,
                c[4] * (y + c[5]).cos() * (c[6] * z).exp() + c[7] * (x - y).sin(),
                c[8] * (x + 2.0 * y).cos() * (1.0 - z) + c[9] + c[10] * z.powi(3) * y.sin(),
            )
        })
    }

    #[test]
    fn grid_round_trip() {
        let g = grid();
        let u = random_field(g, 1);
        let v = SpectralField::from_grid_values(g, &u.to_grid_values()).unwrap();
        assert!(u.sub(&v).max_norm() < 1e-13);
    }

    #[test]
    fn curl_of_sin_z() {
        let g = ChannelGrid::periodic_2pi(8, 8, 25);
        let u = SpectralField::from_fn(g, |p| Vec3::new(p.z.sin(), 0.0, 0.0));
        let w = u.curl();
        let expect = SpectralField::from_fn(g, |p| Vec3::new(0.0, p.z.cos(), 0.0));
        assert!(w.sub(&expect).max_norm() < 1e-12);
        let w2 = u.iterated_curl(2).unwrap();
        assert!(w2.sub(&u).max_norm() < 1e-11);
        assert!(matches!(u.iterated_curl(7), Err(Error::OrderTooHigh { .. })));
    }

    #[test]
    fn div_curl_and_curl_grad_vanish() {
        let g = grid();
        let u = random_field(g, 2);
        let dc = u.curl().divergence();
        assert!(dc.max_abs() < 1e-10 * (1.0 + u.max_norm()));
        let p = SpectralScalar::from_fn(g, |x, y, z| x.sin() * (2.0 * y).cos() * z.powi(3));
        let grad = SpectralField::from_components([p.dx(), p.dy(), p.dz()]);
        assert!(grad.curl().max_norm() < 1e-10);
    }

    #[test]
    fn parseval_matches_grid_quadrature() {
        let g = grid();
        let u = random_field(g, 3);
        let a = u.l2_norm_sq();
        let b = u.l2_norm_sq_grid();
        assert!((a - b).abs() / a < 1e-12);
    }

    #[test]
    fn chebyshev_coefficients_round_trip() {
        let g = grid();
        let u = random_field(g, 4);
        let c = u.comps[1].chebyshev_coeffs();
        let back = SpectralScalar::from_chebyshev_coeffs(g, &c).unwrap();
        let diff: f64 = back.data.iter().zip(&u.comps[1].data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13);
    }

    #[test]
    fn evaluate_matches_samples() {
        let g = grid();
        let u = random_field(g, 5);
        let v = u.to_grid_values();
        let n = g.len();
        let (i, j, k) = (3, 4, 5);
        let z = g.z_nodes()[k];
        let e = u.evaluate(&Vec3::new(g.x(i), g.y(j), z));
        let a = i + g.nx * (j + g.ny * k);
        assert!((e - Vec3::new(v[a], v[n + a], v[2 * n + a])).norm() < 1e-12);
    }

    #[test]
    fn curl_curl_is_minus_laplacian_for_solenoidal_fields() {
        let g = ChannelGrid::periodic_2pi(8, 8, 21);
        let u = SpectralField::from_analytic(g, &periodic_solenoidal());
        let a = u.iterated_curl(2).unwrap();
        let b = u.neg_laplacian();
        assert!(a.sub(&b).max_norm() < 1e-8 * b.max_norm());
    }

    #[test]
    fn projection_properties() {
        let g = grid();
        let proj = LerayProjector::new(g).unwrap();
        let u = random_field(g, 6);
        let v = random_field(g, 7);
        let pu = proj.project(&u);
        let norm = u.l2_norm();
        assert!(pu.divergence().max_abs() < 1e-8 * norm);
        assert!(pu.wall_normal_max() < 1e-10 * norm);
        let ppu = proj.project(&pu);
        assert!(ppu.sub(&pu).l2_norm() < 1e-10 * norm);
        let pv = proj.project(&v);
        let lhs = pu.inner(&v);
        let rhs = u.inner(&pv);
        assert!((lhs - rhs).abs() < 1e-9 * (lhs.abs() + norm * v.l2_norm()));
    }

    #[test]
    fn projection_annihilates_gradients() {
        let g = grid();
        let p = SpectralScalar::from_fn(g, |x, y, _| x.sin() * y.cos());
        let grad = SpectralField::from_components([p.dx(), p.dy(), p.dz()]);
        let out = leray_project(&grad).unwrap();
        assert!(out.max_norm() < 1e-10);
    }

    #[test]
    fn projection_keeps_admissible_fields() {
        let g = ChannelGrid::periodic_2pi(8, 8, 25);
        let u = SpectralField::from_analytic(g, &periodic_solenoidal());
        let pu = leray_project(&u).unwrap();
        assert!(pu.sub(&u).max_norm() < 1e-10 * u.max_norm());
        let m = SpectralField::from_analytic(g, &channel_robin_mode(1.0));
        assert!(leray_project(&m).unwrap().sub(&m).max_norm() < 1e-12);
    }

    #[test]
    fn sobolev_norm_breakdown_of_sin_z() {
        // (sin z, 0, 0) over z in [-1, 1]
        let g = ChannelGrid::periodic_2pi(4, 4, 25);
        let u = SpectralField::from_fn(g, |p| Vec3::new(p.z.sin(), 0.0, 0.0));
        let s = u.sobolev_norm(1).unwrap();
        let area = TAU * TAU;
        let i_sin = 1.0 - 2f64.sin() / 2.0;
        let i_cos = 1.0 + 2f64.sin() / 2.0;
        assert!((s.breakdown[0] - area * i_sin).abs() < 1e-12);
        assert!((s.breakdown[1] - area * i_cos).abs() < 1e-12);
        assert!((s.value - (area * (i_sin + i_cos)).sqrt()).abs() < 1e-12);
        let r0 = u.sobolev_norm(0).unwrap();
        assert!((r0.value - u.l2_norm()).abs() < 1e-12 * u.l2_norm());
    }
}
