//! Physical unknowns, divergence-free reconstruction of the normal
//! components, boundary conditions, and the magnetic convection fields
//! `xi = (f dx + h dz) f`, `eta = (f dx + h dz) u` (and their 3D analogs).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, Physical};
use crate::grid::Grid;

/// Tangential components `u_h`, `f_h` plus the reconstructed `w`, `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    /// `[u]` in 2D, `[u, v]` in 3D.
    pub u_h: Vec<Field>,
    /// `[f]` in 2D, `[f, g]` in 3D.
    pub f_h: Vec<Field>,
    pub w: Field,
    pub h: Field,
}

/// Time derivatives of the tangential components.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendency {
    pub du: Vec<Field>,
    pub df: Vec<Field>,
}

impl Tendency {
    pub fn zeros(grid: &Arc<Grid>) -> Tendency {
        let n = grid.dim() - 1;
        Tendency {
            du: vec![Field::zeros(grid); n],
            df: vec![Field::zeros(grid); n],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.du
            .iter()
            .chain(&self.df)
            .map(Field::max_abs_spectral)
            .fold(0.0, f64::max)
    }
}

/// `xi = [xi_1, xi_2]`, `eta = [eta_1, eta_2]` (one entry each in 2D).
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearFields {
    pub xi: Vec<Field>,
    pub eta: Vec<Field>,
}

/// `-int_0^z div_h a_h`, i.e. the normal component slaved to `a_h`.
pub fn reconstruct_normal(a_h: &[Field]) -> Field {
    let mut div = a_h[0].ddx();
    if a_h.len() > 1 {
        div.axpy(1.0, &a_h[1].ddy());
    }
    div.integrate_z_cumulative().scale(-1.0)
}

/// Largest staggered divergence `avg(div_h a) + dz(a_z)` over all cells,
/// evaluated with the midpoint differences that the trapezoid
/// reconstruction satisfies exactly.
pub fn divergence_defect(a_h: &[Field], a_z: &Field) -> (f64, f64) {
    let grid = a_z.grid();
    let z = &grid.z_levels;
    let nz = grid.nz();
    let mut div = a_h[0].ddx();
    if a_h.len() > 1 {
        div.axpy(1.0, &a_h[1].ddy());
    }
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for kidx in 0..grid.n_modes() {
        let g = div.column(kidx);
        let w = a_z.column(kidx);
        for j in 0..nz - 1 {
            let dz = z[j + 1] - z[j];
            let avg = (g[j] + g[j + 1]) * 0.5;
            let dw = (w[j + 1] - w[j]) / dz;
            worst = worst.max((avg + dw).norm());
            scale = scale.max(avg.norm() + dw.norm());
        }
    }
    (worst, scale)
}

/// Transport operator `a . grad` for a divergence-free pair
/// (tangential components, normal component), held in physical space.
pub struct Transport {
    grid: Arc<Grid>,
    tangential: Vec<Physical>,
    normal: Physical,
}

impl Transport {
    pub fn new(tangential: &[Field], normal: &Field) -> Transport {
        Transport {
            grid: Arc::clone(normal.grid()),
            tangential: tangential.iter().map(Physical::of).collect(),
            normal: Physical::of(normal),
        }
    }

    /// `(a . grad) target` in physical space, not dealiased.
    pub fn apply_physical(&self, target: &Field) -> Physical {
        let mut out = Physical::zeros(&self.grid);
        out.add_product(&self.tangential[0], &Physical::of(&target.ddx()));
        if self.tangential.len() > 1 {
            out.add_product(&self.tangential[1], &Physical::of(&target.ddy()));
        }
        out.add_product(&self.normal, &Physical::of(&target.ddz()));
        out
    }

    /// `(a . grad) target`, dealiased.
    pub fn apply(&self, target: &Field) -> Field {
        self.apply_physical(target).into_field(&self.grid)
    }
}

impl State {
    /// Builds a state from its tangential components; `w` and `h` are
    /// reconstructed.
    pub fn new(t: f64, u_h: Vec<Field>, f_h: Vec<Field>) -> Result<State> {
        let grid = Arc::clone(u_h.first().ok_or(Error::GridMismatch)?.grid());
        let n = grid.dim() - 1;
        if u_h.len() != n || f_h.len() != n {
            return Err(Error::Unsupported(format!(
                "dimension {} needs {} tangential components, got {}/{}",
                grid.dim(),
                n,
                u_h.len(),
                f_h.len()
            )));
        }
        for c in u_h.iter().chain(&f_h) {
            if !c.grid().same_as(&grid) {
                return Err(Error::GridMismatch);
            }
        }
        let w = reconstruct_normal(&u_h);
        let h = reconstruct_normal(&f_h);
        Ok(State { t, u_h, f_h, w, h })
    }

    pub fn zeros(grid: &Arc<Grid>) -> State {
        let n = grid.dim() - 1;
        State {
            t: 0.0,
            u_h: vec![Field::zeros(grid); n],
            f_h: vec![Field::zeros(grid); n],
            w: Field::zeros(grid),
            h: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.w.grid()
    }

    pub fn refresh_normals(&mut self) {
        self.w = reconstruct_normal(&self.u_h);
        self.h = reconstruct_normal(&self.f_h);
    }

    /// Dirichlet `u_h = 0` at both ends, one-sided Neumann `dz f_h = 0` at
    /// both ends, then `w`, `h` refreshed.
    pub fn apply_boundary_conditions(&self) -> State {
        let mut out = self.clone();
        let grid = Arc::clone(self.grid());
        for u in out.u_h.iter_mut() {
            enforce_dirichlet(u);
        }
        for f in out.f_h.iter_mut() {
            enforce_neumann(f, &grid);
        }
        out.refresh_normals();
        out
    }

    /// Compatibility of initial data: `u_h(z=0) = 0` and `dz f_h(z=0) = 0`.
    pub fn check_compatibility(&self) -> Result<()> {
        let grid = self.grid();
        let nz = grid.nz();
        let h0 = grid.z_levels[1] - grid.z_levels[0];
        for (i, u) in self.u_h.iter().enumerate() {
            let scale = u.max_abs_spectral();
            let wall = (0..grid.n_modes())
                .map(|k| u.data()[k * nz].norm())
                .fold(0.0, f64::max);
            if wall > 1e-10 * scale.max(f64::MIN_POSITIVE) && wall > 0.0 {
                return Err(Error::Incompatible(format!(
                    "velocity component {i} is {wall:.3e} at z = 0"
                )));
            }
        }
        for (i, f) in self.f_h.iter().enumerate() {
            let df = f.ddz();
            let scale = df.max_abs_spectral().max(f.max_abs_spectral());
            let wall = (0..grid.n_modes())
                .map(|k| df.data()[k * nz].norm())
                .fold(0.0, f64::max);
            let tol = 1e-10_f64.max(h0 * h0) * scale;
            if wall > tol {
                return Err(Error::Incompatible(format!(
                    "normal derivative of magnetic component {i} is {wall:.3e} at z = 0"
                )));
            }
        }
        Ok(())
    }

    /// Largest `max |a|` over the velocity components in physical space.
    pub fn velocity_max(&self) -> f64 {
        self.u_h
            .iter()
            .map(Field::max_abs_physical)
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.u_h.iter().chain(&self.f_h).all(Field::is_finite)
    }

    /// `0.5 (|u_h|^2 + |f_h|^2)` in unweighted `L^2`.
    pub fn energy(&self) -> f64 {
        0.5 * self
            .u_h
            .iter()
            .chain(&self.f_h)
            .map(|c| c.inner_product(c).unwrap_or(0.0))
            .sum::<f64>()
    }

    /// Magnetic transport `f dx + g dy + h dz`.
    pub fn magnetic_transport(&self) -> Transport {
        Transport::new(&self.f_h, &self.h)
    }

    /// Velocity transport `u dx + v dy + w dz`.
    pub fn velocity_transport(&self) -> Transport {
        Transport::new(&self.u_h, &self.w)
    }
}

pub(crate) fn enforce_dirichlet(u: &mut Field) {
    let grid = Arc::clone(u.grid());
    let nz = grid.nz();
    for kidx in 0..grid.n_modes() {
        let col = u.column_mut(kidx);
        col[0] = Default::default();
        col[nz - 1] = Default::default();
    }
}

/// Solves the one-sided first-derivative stencil for the end value so that
/// `dz f = 0` holds exactly for that stencil at both ends.
pub(crate) fn enforce_neumann(f: &mut Field, grid: &Grid) {
    let nz = grid.nz();
    let bot = grid.d1[0];
    let top = grid.d1[nz - 1];
    for kidx in 0..grid.n_modes() {
        let col = f.column_mut(kidx);
        col[0] = -(col[1] * bot.w[1] + col[2] * bot.w[2]) / bot.w[0];
        let s = top.start;
        col[nz - 1] = -(col[s] * top.w[0] + col[s + 1] * top.w[1]) / top.w[2];
    }
}

/// `xi_i = (f . grad) f_i`, `eta_i = (f . grad) u_i`, dealiased.
pub fn nonlinear_xi_eta(state: &State) -> NonlinearFields {
    let b = state.magnetic_transport();
    NonlinearFields {
        xi: state.f_h.iter().map(|f| b.apply(f)).collect(),
        eta: state.u_h.iter().map(|u| b.apply(u)).collect(),
    }
}

/// `(dt u_h, dt f_h)` at the given state by substituting the equations.
///
/// Only `order == 1` is available; higher time derivatives come from
/// checkpoint differences.
pub fn initial_time_derivative(state: &State, order: u32) -> Result<Tendency> {
    if order != 1 {
        return Err(Error::Unsupported(format!(
            "time-derivative order {order} (only 1 is computed by substitution)"
        )));
    }
    let eps = state.grid().config.eps;
    Ok(crate::solver::rhs_regularized(state, eps))
}
