//! Discrete half-plane (or half-space): periodic tangential directions times a
//! truncated, stretched normal direction `z in [0, Zmax]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Physical and numerical parameters of the computational domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainConfig {
    /// Spatial dimension, 2 or 3.
    pub dim: usize,
    pub lx: f64,
    /// Ignored when `dim == 2`.
    pub ly: f64,
    pub zmax: f64,
    pub nx: usize,
    /// Forced to 1 when `dim == 2`.
    pub ny: usize,
    pub nz: usize,
    /// Ratio between the last and the first normal spacing (1 = uniform).
    pub stretch: f64,
    /// Weight exponent of `<z>^(ell + j)`.
    pub ell: f64,
    pub nu: f64,
    pub mu: f64,
    /// Tangential regularization.
    pub eps: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            lx: 2.0 * PI,
            ly: 2.0 * PI,
            zmax: 8.0,
            nx: 32,
            ny: 1,
            nz: 64,
            stretch: 1.0,
            ell: 1.0,
            nu: 1.0,
            mu: 0.5,
            eps: 0.0,
        }
    }
}

fn range_err(key: &str, value: impl fmt::Display, allowed: &str) -> Error {
    Error::Range {
        key: key.to_string(),
        value: value.to_string(),
        allowed: allowed.to_string(),
    }
}

impl DomainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(range_err("dim", self.dim, "2 or 3"));
        }
        if !(self.lx > 0.0 && self.lx.is_finite()) {
            return Err(range_err("lx", self.lx, "> 0"));
        }
        if self.nx < 8 || self.nx % 2 != 0 {
            return Err(range_err("nx", self.nx, "even and >= 8"));
        }
        if self.dim == 3 {
            if !(self.ly > 0.0 && self.ly.is_finite()) {
                return Err(range_err("ly", self.ly, "> 0"));
            }
            if self.ny < 8 || self.ny % 2 != 0 {
                return Err(range_err("ny", self.ny, "even and >= 8"));
            }
        } else if self.ny != 1 {
            return Err(range_err("ny", self.ny, "1 when dim = 2"));
        }
        if self.nz < 16 {
            return Err(range_err("nz", self.nz, ">= 16"));
        }
        if !(self.zmax > 0.0 && self.zmax.is_finite()) {
            return Err(range_err("zmax", self.zmax, "> 0"));
        }
        if !(self.stretch >= 1.0 && self.stretch.is_finite()) {
            return Err(range_err("stretch", self.stretch, ">= 1"));
        }
        if !(self.ell >= 1.0 && self.ell.is_finite()) {
            return Err(range_err("ell", self.ell, ">= 1"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(range_err("nu", self.nu, "> 0"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(range_err("mu", self.mu, "> 0"));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(range_err("eps", self.eps, ">= 0"));
        }
        Ok(())
    }

    /// Number of tangential modes (`nx * ny`).
    pub fn n_modes(&self) -> usize {
        self.nx * self.ny
    }
}

/// Finite-difference stencil anchored at `start` in a normal column.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub start: usize,
    pub len: usize,
    pub w: [f64; 4],
}

impl Stencil {
    #[inline]
    pub fn apply<T>(&self, col: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let mut acc = col[self.start] * self.w[0];
        for i in 1..self.len {
            acc = acc + col[self.start + i] * self.w[i];
        }
        acc
    }
}

/// Fornberg's recursion: weights of derivatives `0..=order` at `x0` on nodes `xs`.
///
/// Returns `c[d][i]`, the weight of node `i` for the `d`-th derivative.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

fn stencil_from(zs: &[f64], start: usize, len: usize, at: usize, deriv: usize) -> Stencil {
    let c = fornberg_weights(zs[at], &zs[start..start + len], deriv);
    let mut w = [0.0; 4];
    w[..len].copy_from_slice(&c[deriv][..len]);
    Stencil { start, len, w }
}

/// Immutable discretization shared by every [`crate::field::Field`].
pub struct Grid {
    pub config: DomainConfig,
    pub z_levels: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// Tangential wavenumbers in FFT order, `2 pi m / Lx`.
    pub k_values: Vec<f64>,
    pub ky_values: Vec<f64>,
    /// Signed mode indices matching `k_values` / `ky_values`.
    pub mx: Vec<i64>,
    pub my: Vec<i64>,
    /// First and second normal derivative stencils, one per level.
    pub d1: Vec<Stencil>,
    pub d2: Vec<Stencil>,
    /// `<z>^2 = 1 + z^2` per level.
    pub bracket_sq: Vec<f64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("config", &self.config).finish()
    }
}

fn signed_modes(n: usize) -> Vec<i64> {
    (0..n)
        .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
        .collect()
}

/// Normal levels `z_j = Zmax (e^{s eta_j} - 1) / (e^s - 1)` with `s = ln(stretch)`.
pub fn stretched_levels(zmax: f64, nz: usize, stretch: f64) -> Vec<f64> {
    let s = stretch.ln();
    let last = nz - 1;
    let mut z: Vec<f64> = (0..nz)
        .map(|j| {
            let eta = j as f64 / last as f64;
            if s.abs() < 1e-12 {
                zmax * eta
            } else {
                zmax * (s * eta).exp_m1() / s.exp_m1()
            }
        })
        .collect();
    z[0] = 0.0;
    z[last] = zmax;
    z
}

impl Grid {
    pub fn new(mut config: DomainConfig) -> Result<Arc<Grid>> {
        if config.dim == 2 {
            config.ny = 1;
        }
        config.validate()?;
        let nz = config.nz;
        let z = stretched_levels(config.zmax, nz, config.stretch);

        let mut quad = vec![0.0; nz];
        for j in 0..nz - 1 {
            let h = z[j + 1] - z[j];
            quad[j] += 0.5 * h;
            quad[j + 1] += 0.5 * h;
        }

        let mut d1 = Vec::with_capacity(nz);
        let mut d2 = Vec::with_capacity(nz);
        for j in 0..nz {
            if j == 0 {
                d1.push(stencil_from(&z, 0, 3, 0, 1));
                d2.push(stencil_from(&z, 0, 4, 0, 2));
            } else if j == nz - 1 {
                d1.push(stencil_from(&z, nz - 3, 3, j, 1));
                d2.push(stencil_from(&z, nz - 4, 4, j, 2));
            } else {
                d1.push(stencil_from(&z, j - 1, 3, j, 1));
                d2.push(stencil_from(&z, j - 1, 3, j, 2));
            }
        }

        let mx = signed_modes(config.nx);
        let my = signed_modes(config.ny);
        let kx0 = 2.0 * PI / config.lx;
        let ky0 = if config.dim == 3 { 2.0 * PI / config.ly } else { 0.0 };
        let k_values = mx.iter().map(|&m| m as f64 * kx0).collect();
        let ky_values = my.iter().map(|&m| m as f64 * ky0).collect();

        let mut planner = FftPlanner::<f64>::new();
        let fft_x = planner.plan_fft_forward(config.nx);
        let ifft_x = planner.plan_fft_inverse(config.nx);
        let fft_y = if config.dim == 3 {
            Some((
                planner.plan_fft_forward(config.ny),
                planner.plan_fft_inverse(config.ny),
            ))
        } else {
            None
        };
        let bracket_sq = z.iter().map(|z| 1.0 + z * z).collect();

        Ok(Arc::new(Grid {
            config,
            z_levels: z,
            quad_weights: quad,
            k_values,
            ky_values,
            mx,
            my,
            d1,
            d2,
            bracket_sq,
            fft_x,
            ifft_x,
            fft_y,
        }))
    }

    pub fn nx(&self) -> usize {
        self.config.nx
    }
    pub fn ny(&self) -> usize {
        self.config.ny
    }
    pub fn nz(&self) -> usize {
        self.config.nz
    }
    pub fn dim(&self) -> usize {
        self.config.dim
    }
    pub fn n_modes(&self) -> usize {
        self.config.n_modes()
    }
    pub fn len(&self) -> usize {
        self.n_modes() * self.nz()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tangential measure: `Lx` in 2D, `Lx * Ly` in 3D.
    pub fn tangential_area(&self) -> f64 {
        if self.dim() == 3 {
            self.config.lx * self.config.ly
        } else {
            self.config.lx
        }
    }

    /// Wavenumber pair of flattened mode index `kidx = iy * nx + ix`.
    #[inline]
    pub fn wavenumber(&self, kidx: usize) -> (f64, f64) {
        let nx = self.nx();
        (self.k_values[kidx % nx], self.ky_values[kidx / nx])
    }

    #[inline]
    pub fn mode_index(&self, kidx: usize) -> (i64, i64) {
        let nx = self.nx();
        (self.mx[kidx % nx], self.my[kidx / nx])
    }

    /// True for the x- or y-Nyquist mode (no real-valued odd derivative).
    #[inline]
    pub fn is_nyquist(&self, kidx: usize) -> (bool, bool) {
        let nx = self.nx();
        let (ix, iy) = (kidx % nx, kidx / nx);
        (ix == nx / 2, self.dim() == 3 && iy == self.ny() / 2)
    }

    /// Largest retained `|m|` under the 2/3 rule (strictly below `n / 3`).
    pub fn dealias_cutoff(n: usize) -> i64 {
        (n as i64 + 2) / 3 - 1
    }

    #[inline]
    pub fn is_dealiased_out(&self, kidx: usize) -> bool {
        let (mx, my) = self.mode_index(kidx);
        mx.abs() > Self::dealias_cutoff(self.nx())
            || (self.dim() == 3 && my.abs() > Self::dealias_cutoff(self.ny()))
    }

    /// Mode index of the Hermitian partner of `kidx`.
    pub fn conjugate_mode(&self, kidx: usize) -> usize {
        let (nx, ny) = (self.nx(), self.ny());
        let (ix, iy) = (kidx % nx, kidx / nx);
        ((ny - iy) % ny) * nx + (nx - ix) % nx
    }

    pub fn x_coord(&self, ix: usize) -> f64 {
        self.config.lx * ix as f64 / self.nx() as f64
    }

    pub fn y_coord(&self, iy: usize) -> f64 {
        if self.dim() == 3 {
            self.config.ly * iy as f64 / self.ny() as f64
        } else {
            0.0
        }
    }

    /// Smallest normal spacing.
    pub fn dz_min(&self) -> f64 {
        self.z_levels
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dz_max(&self) -> f64 {
        self.z_levels
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn dx(&self) -> f64 {
        let dx = self.config.lx / self.nx() as f64;
        if self.dim() == 3 {
            dx.min(self.config.ly / self.ny() as f64)
        } else {
            dx
        }
    }

    pub(crate) fn fft_x(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_x
    }
    pub(crate) fn ifft_x(&self) -> &Arc<dyn Fft<f64>> {
        &self.ifft_x
    }
    pub(crate) fn fft_y(&self) -> Option<&(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)> {
        self.fft_y.as_ref()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self.config == other.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nz: usize, stretch: f64) -> DomainConfig {
        DomainConfig {
            nz,
            stretch,
            ..DomainConfig::default()
        }
    }

    #[test]
    fn levels_hit_endpoints_and_increase() {
        for stretch in [1.0, 2.0, 10.0] {
            let g = Grid::new(cfg(33, stretch)).unwrap();
            assert_eq!(g.z_levels[0], 0.0);
            assert_eq!(*g.z_levels.last().unwrap(), g.config.zmax);
            assert!(g.z_levels.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn quadrature_sums_to_height() {
        let g = Grid::new(cfg(129, 6.0)).unwrap();
        let s: f64 = g.quad_weights.iter().sum();
        assert!((s - g.config.zmax).abs() <= 1e-12 * g.config.zmax);
    }

    #[test]
    fn stretch_ratio_matches_spacing_ratio() {
        let g = Grid::new(cfg(257, 4.0)).unwrap();
        let ratio = g.dz_max() / g.dz_min();
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn wavenumbers_are_hermitian_symmetric() {
        let g = Grid::new(cfg(16, 1.0)).unwrap();
        let n = g.nx();
        for i in 1..n / 2 {
            assert_eq!(g.k_values[n - i], -g.k_values[i]);
        }
        assert_eq!(g.k_values[0], 0.0);
    }

    #[test]
    fn fornberg_reproduces_centered_weights() {
        let c = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((c[1][0] + 0.5).abs() < 1e-15 && (c[1][2] - 0.5).abs() < 1e-15);
        assert!((c[2][0] - 1.0).abs() < 1e-15 && (c[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn dealias_cutoff_is_strictly_below_a_third() {
        assert_eq!(Grid::dealias_cutoff(64), 21);
        assert_eq!(Grid::dealias_cutoff(8), 2);
        assert_eq!(Grid::dealias_cutoff(66), 21);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            DomainConfig { nx: 10 + 1, ..Default::default() },
            DomainConfig { nz: 8, ..Default::default() },
            DomainConfig { ell: 0.5, ..Default::default() },
            DomainConfig { nu: 0.0, ..Default::default() },
            DomainConfig { eps: -1.0, ..Default::default() },
            DomainConfig { stretch: 0.5, ..Default::default() },
            DomainConfig { dim: 4, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
