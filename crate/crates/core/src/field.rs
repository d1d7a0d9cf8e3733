//! Scalar unknowns stored as a tangential Fourier spectrum times normal
//! collocation values.
//!
//! Layout is k-major: entry `kidx * nz + j` holds mode `kidx = iy * nx + ix`
//! at level `z_j`. Physical arrays use the same layout with `ix`, `iy` as
//! grid indices instead of mode indices. The spectrum is normalized so that
//! `a(x) = sum_k a_k e^{i k x}`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    data: Vec<C64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.data == other.data
    }
}

fn run_lines(
    buf: &mut [C64],
    fft: &Arc<dyn Fft<f64>>,
    n_outer: usize,
    n_line: usize,
    index: impl Fn(usize, usize) -> usize,
) {
    let mut line = vec![C64::new(0.0, 0.0); n_line];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for outer in 0..n_outer {
        for (i, v) in line.iter_mut().enumerate() {
            *v = buf[index(outer, i)];
        }
        fft.process_with_scratch(&mut line, &mut scratch);
        for (i, v) in line.iter().enumerate() {
            buf[index(outer, i)] = *v;
        }
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: Arc::clone(grid),
            data: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Wraps raw spectral data; `data.len()` must equal `grid.len()`.
    pub fn from_spectrum(grid: &Arc<Grid>, data: Vec<C64>) -> Result<Field> {
        if data.len() != grid.len() {
            return Err(Error::Format(format!(
                "spectrum has {} entries, grid expects {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            data,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, kidx: usize) -> &[C64] {
        let nz = self.grid.nz();
        &self.data[kidx * nz..(kidx + 1) * nz]
    }

    pub fn column_mut(&mut self, kidx: usize) -> &mut [C64] {
        let nz = self.grid.nz();
        &mut self.data[kidx * nz..(kidx + 1) * nz]
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Samples `f(x, y, z)` on the physical grid (no dealiasing).
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64, f64) -> f64) -> Field {
        let (nx, ny, nz) = (grid.nx(), grid.ny(), grid.nz());
        let mut phys = vec![0.0; grid.len()];
        for iy in 0..ny {
            let y = grid.y_coord(iy);
            for ix in 0..nx {
                let x = grid.x_coord(ix);
                let base = (iy * nx + ix) * nz;
                for (j, &z) in grid.z_levels.iter().enumerate() {
                    phys[base + j] = f(x, y, z);
                }
            }
        }
        Field::from_physical(grid, &phys)
    }

    pub fn from_physical(grid: &Arc<Grid>, phys: &[f64]) -> Field {
        assert_eq!(phys.len(), grid.len());
        let (nx, ny, nz) = (grid.nx(), grid.ny(), grid.nz());
        let mut buf: Vec<C64> = phys.iter().map(|&v| C64::new(v, 0.0)).collect();
        run_lines(&mut buf, grid.fft_x(), ny * nz, nx, |o, i| {
            let (iy, j) = (o / nz, o % nz);
            (iy * nx + i) * nz + j
        });
        if let Some((fwd, _)) = grid.fft_y() {
            run_lines(&mut buf, fwd, nx * nz, ny, |o, i| {
                let (ix, j) = (o / nz, o % nz);
                (i * nx + ix) * nz + j
            });
        }
        let scale = 1.0 / (nx * ny) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        Field {
            grid: Arc::clone(grid),
            data: buf,
        }
    }

    /// Forward transform followed by the 2/3-rule truncation.
    pub fn from_physical_dealiased(grid: &Arc<Grid>, phys: &[f64]) -> Field {
        let mut f = Field::from_physical(grid, phys);
        f.dealias();
        f
    }

    pub fn to_physical(&self) -> Vec<f64> {
        let grid = &self.grid;
        let (nx, ny, nz) = (grid.nx(), grid.ny(), grid.nz());
        let mut buf = self.data.clone();
        if let Some((_, inv)) = grid.fft_y() {
            run_lines(&mut buf, inv, nx * nz, ny, |o, i| {
                let (ix, j) = (o / nz, o % nz);
                (i * nx + ix) * nz + j
            });
        }
        run_lines(&mut buf, grid.ifft_x(), ny * nz, nx, |o, i| {
            let (iy, j) = (o / nz, o % nz);
            (iy * nx + i) * nz + j
        });
        buf.into_iter().map(|c| c.re).collect()
    }

    pub fn dealias(&mut self) {
        let nz = self.grid.nz();
        for kidx in 0..self.grid.n_modes() {
            if self.grid.is_dealiased_out(kidx) {
                self.data[kidx * nz..(kidx + 1) * nz].fill(C64::new(0.0, 0.0));
            }
        }
    }

    /// `d^ax/dx^ax d^ay/dy^ay`, exact in the spectrum. Nyquist modes are
    /// zeroed for odd orders.
    pub fn tangential_derivative(&self, ax: u32, ay: u32) -> Field {
        if ax == 0 && ay == 0 {
            return self.clone();
        }
        let grid = &self.grid;
        let nz = grid.nz();
        let mut out = self.clone();
        for kidx in 0..grid.n_modes() {
            let (kx, ky) = grid.wavenumber(kidx);
            let (nyq_x, nyq_y) = grid.is_nyquist(kidx);
            let zero = (nyq_x && ax % 2 == 1) || (nyq_y && ay % 2 == 1);
            let factor = if zero {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, kx).powu(ax) * C64::new(0.0, ky).powu(ay)
            };
            for v in &mut out.data[kidx * nz..(kidx + 1) * nz] {
                *v *= factor;
            }
        }
        out
    }

    pub fn ddx(&self) -> Field {
        self.tangential_derivative(1, 0)
    }

    pub fn ddy(&self) -> Field {
        if self.grid.dim() == 2 {
            return Field::zeros(&self.grid);
        }
        self.tangential_derivative(0, 1)
    }

    pub fn ddx_n(&self, n: u32) -> Field {
        self.tangential_derivative(n, 0)
    }

    /// Tangential Laplacian `dxx + dyy`.
    pub fn tangential_laplacian(&self) -> Field {
        let grid = &self.grid;
        let nz = grid.nz();
        let mut out = self.clone();
        for kidx in 0..grid.n_modes() {
            let (kx, ky) = grid.wavenumber(kidx);
            let f = -(kx * kx + ky * ky);
            for v in &mut out.data[kidx * nz..(kidx + 1) * nz] {
                *v *= f;
            }
        }
        out
    }

    fn apply_normal(&self, stencils: &[crate::grid::Stencil]) -> Field {
        let nz = self.grid.nz();
        let mut out = Field::zeros(&self.grid);
        for (src, dst) in self.data.chunks(nz).zip(out.data.chunks_mut(nz)) {
            for (j, st) in stencils.iter().enumerate() {
                dst[j] = st.apply(src);
            }
        }
        out
    }

    /// Second-order finite differences in z (one-sided at both ends).
    pub fn ddz(&self) -> Field {
        self.apply_normal(&self.grid.d1)
    }

    pub fn d2dz2(&self) -> Field {
        self.apply_normal(&self.grid.d2)
    }

    pub fn ddz_n(&self, n: u32) -> Field {
        let mut out = self.clone();
        let mut left = n;
        while left >= 2 {
            out = out.d2dz2();
            left -= 2;
        }
        if left == 1 {
            out = out.ddz();
        }
        out
    }

    /// Trapezoid antiderivative `F(z) = int_0^z a`, with `F(0) = 0`.
    pub fn integrate_z_cumulative(&self) -> Field {
        let z = &self.grid.z_levels;
        let nz = self.grid.nz();
        let mut out = Field::zeros(&self.grid);
        for (src, dst) in self.data.chunks(nz).zip(out.data.chunks_mut(nz)) {
            let mut acc = C64::new(0.0, 0.0);
            dst[0] = acc;
            for j in 1..nz {
                acc += (src[j] + src[j - 1]) * (0.5 * (z[j] - z[j - 1]));
                dst[j] = acc;
            }
        }
        out
    }

    /// Multiplies every column by a real normal profile.
    pub fn scale_by_profile(&self, profile: &[f64]) -> Field {
        let nz = self.grid.nz();
        assert_eq!(profile.len(), nz);
        let mut out = self.clone();
        for col in out.data.chunks_mut(nz) {
            for (v, p) in col.iter_mut().zip(profile) {
                *v *= *p;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Field) {
        debug_assert!(self.grid.same_as(&other.grid));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b * s;
        }
    }

    /// Pointwise product of two fields evaluated in physical space, dealiased.
    pub fn product(&self, other: &Field) -> Field {
        let a = self.to_physical();
        let b = other.to_physical();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Field::from_physical_dealiased(&self.grid, &p)
    }

    /// `int int (1 + z^2)^p a b dx dz` by Parseval in x and trapezoid in z.
    pub fn inner_product_with_exponent(&self, other: &Field, p: f64) -> Result<f64> {
        self.check_same_grid(other)?;
        let grid = &self.grid;
        let nz = grid.nz();
        let wz: Vec<f64> = grid
            .quad_weights
            .iter()
            .zip(&grid.bracket_sq)
            .map(|(w, b)| if p == 0.0 { *w } else { w * b.powf(p) })
            .collect();
        let mut total = 0.0;
        for (ca, cb) in self.data.chunks(nz).zip(other.data.chunks(nz)) {
            let mut s = 0.0;
            for j in 0..nz {
                s += wz[j] * (ca[j].re * cb[j].re + ca[j].im * cb[j].im);
            }
            total += s;
        }
        Ok(total * grid.tangential_area())
    }

    /// `(<z>^{ell+j} a, <z>^{ell+j} b)_{L^2}` with `ell` from the grid.
    pub fn inner_product_weighted(&self, other: &Field, j: u32) -> Result<f64> {
        let p = self.grid.config.ell + j as f64;
        self.inner_product_with_exponent(other, p)
    }

    /// Unweighted `L^2` inner product.
    pub fn inner_product(&self, other: &Field) -> Result<f64> {
        self.inner_product_with_exponent(other, 0.0)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner_product(self).unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn norm_l2_weighted(&self, p: f64) -> f64 {
        self.inner_product_with_exponent(self, p)
            .unwrap_or(0.0)
            .max(0.0)
            .sqrt()
    }

    pub fn max_abs_physical(&self) -> f64 {
        self.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_spectral(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |a(-k, z) - conj(a(k, z))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let nz = self.grid.nz();
        let mut worst: f64 = 0.0;
        for kidx in 0..self.grid.n_modes() {
            let partner = self.grid.conjugate_mode(kidx);
            for j in 0..nz {
                let d = self.data[partner * nz + j] - self.data[kidx * nz + j].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Mode-`kidx` value at level `j`.
    pub fn at(&self, kidx: usize, j: usize) -> C64 {
        self.data[kidx * self.grid.nz() + j]
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

/// Physical-space snapshot used to assemble several products from one
/// transform per factor.
pub struct Physical {
    pub values: Vec<f64>,
}

impl Physical {
    pub fn of(f: &Field) -> Physical {
        Physical {
            values: f.to_physical(),
        }
    }

    pub fn zeros(grid: &Grid) -> Physical {
        Physical {
            values: vec![0.0; grid.len()],
        }
    }

    /// `self += a * b` pointwise.
    pub fn add_product(&mut self, a: &Physical, b: &Physical) {
        for ((o, x), y) in self.values.iter_mut().zip(&a.values).zip(&b.values) {
            *o += x * y;
        }
    }

    pub fn into_field(self, grid: &Arc<Grid>) -> Field {
        Field::from_physical_dealiased(grid, &self.values)
    }
}
