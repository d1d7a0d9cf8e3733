//! Backward-Euler normal diffusion: one tridiagonal solve per tangential
//! wavenumber with the boundary rows folded in.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::field::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bc {
    /// Homogeneous Dirichlet.
    Dirichlet,
    /// Homogeneous Neumann through the one-sided first-derivative stencil.
    Neumann,
}

/// Solves `(I - coef D2 + tan_coef |k|^2) x = rhs` column by column, where
/// `D2` is the grid's second-derivative stencil. End values follow `bottom`
/// and `top`; the rhs entries at the end rows are ignored.
pub fn solve_diffusion(rhs: &Field, coef: f64, tan_coef: f64, bottom: Bc, top: Bc) -> Field {
    let grid = rhs.grid().clone();
    let nz = grid.nz();
    let n = nz - 2;
    let d2 = &grid.d2;
    let bot = grid.d1[0];
    let tp = grid.d1[nz - 1];

    let mut out = rhs.clone();
    out.data_mut()
        .par_chunks_mut(nz)
        .enumerate()
        .for_each(|(kidx, col)| {
            let (kx, ky) = grid.wavenumber(kidx);
            let diag_shift = 1.0 + tan_coef * (kx * kx + ky * ky);
            // interior rows 1..=nz-2 mapped to 0..n
            let mut lo = vec![0.0; n];
            let mut di = vec![0.0; n];
            let mut up = vec![0.0; n];
            for r in 0..n {
                let st = &d2[r + 1];
                debug_assert_eq!(st.start, r);
                lo[r] = -coef * st.w[0];
                di[r] = diag_shift - coef * st.w[1];
                up[r] = -coef * st.w[2];
            }
            if bottom == Bc::Neumann {
                // x0 = -(c1 x1 + c2 x2) / c0
                di[0] -= lo[0] * bot.w[1] / bot.w[0];
                up[0] -= lo[0] * bot.w[2] / bot.w[0];
            }
            if top == Bc::Neumann {
                // x_{N-1} = -(t0 x_{N-3} + t1 x_{N-2}) / t2
                let c = up[n - 1];
                lo[n - 1] -= c * tp.w[0] / tp.w[2];
                di[n - 1] -= c * tp.w[1] / tp.w[2];
            }
            lo[0] = 0.0;
            up[n - 1] = 0.0;

            let mut r: Vec<Complex64> = col[1..nz - 1].to_vec();
            thomas(&lo, &di, &up, &mut r);
            col[1..nz - 1].copy_from_slice(&r);
            col[0] = match bottom {
                Bc::Dirichlet => Complex64::new(0.0, 0.0),
                Bc::Neumann => -(col[1] * bot.w[1] + col[2] * bot.w[2]) / bot.w[0],
            };
            col[nz - 1] = match top {
                Bc::Dirichlet => Complex64::new(0.0, 0.0),
                Bc::Neumann => {
                    -(col[nz - 3] * tp.w[0] + col[nz - 2] * tp.w[1]) / tp.w[2]
                }
            };
        });
    out
}

/// Thomas algorithm for a real tridiagonal matrix and complex right side.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], r: &mut [Complex64]) {
    let n = r.len();
    let mut c = vec![0.0; n];
    let mut beta = di[0];
    c[0] = up[0] / beta;
    r[0] /= beta;
    for i in 1..n {
        beta = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / beta;
        let prev = r[i - 1];
        r[i] = (r[i] - prev * lo[i]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = r[i + 1];
        r[i] -= next * c[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainConfig, Grid};

    #[test]
    fn solve_inverts_the_operator() {
        let g = Grid::new(DomainConfig {
            nx: 8,
            nz: 33,
            stretch: 3.0,
            ..DomainConfig::default()
        })
        .unwrap();
        let x = Field::from_fn(&g, |x, _, z| (x.sin() + 0.5) * z * (8.0 - z) * (-z).exp());
        let coef = 0.05;
        let tan = 0.01;
        let mut lhs = x.clone();
        lhs.axpy(-coef, &x.d2dz2());
        lhs.axpy(tan, &x.tangential_laplacian().scale(-1.0));
        let mut sol = solve_diffusion(&lhs, coef, tan, Bc::Dirichlet, Bc::Dirichlet);
        // the end rows of x are zero already
        let diff = (&sol - &x).max_abs_spectral();
        assert!(diff < 1e-12, "{diff}");

        // Neumann: the solution must satisfy the one-sided condition
        let rhs = Field::from_fn(&g, |x, _, z| x.cos() * (-z * z).exp());
        sol = solve_diffusion(&rhs, coef, tan, Bc::Neumann, Bc::Neumann);
        let d = sol.ddz();
        for k in 0..g.n_modes() {
            assert!(d.column(k)[0].norm() < 1e-13);
            assert!(d.column(k)[g.nz() - 1].norm() < 1e-13);
        }
    }
}
