//! Manufactured solutions: forcing from the continuous defect of a closed-form
//! solution, and refinement ladders in the normal direction and in time.

use std::sync::Arc;

use log::info;
use statrs::function::erf::erf;

use crate::error::Result;
use crate::field::Field;
use crate::grid::{DomainConfig, Grid};
use crate::state::{State, Tendency};

use super::{run_trajectory, Forcing, SolverConfig};

/// Value and the partial derivatives the forcing needs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub xx: f64,
    pub zz: f64,
}

/// A closed-form 2D solution `(u, f)` with its slaved `(w, h)`.
pub trait Manufactured: Sync {
    fn u(&self, x: f64, z: f64, t: f64) -> Jet;
    fn f(&self, x: f64, z: f64, t: f64) -> Jet;
    fn w(&self, x: f64, z: f64, t: f64) -> f64;
    fn h(&self, x: f64, z: f64, t: f64) -> f64;

    fn state(&self, grid: &Arc<Grid>, t: f64) -> Result<State> {
        let u = Field::from_fn(grid, |x, _, z| self.u(x, z, t).v);
        let f = Field::from_fn(grid, |x, _, z| self.f(x, z, t).v);
        let mut s = State::new(t, vec![u], vec![f])?;
        s.t = t;
        Ok(s)
    }
}

/// The trivial solution.
pub struct ZeroSolution;

impl Manufactured for ZeroSolution {
    fn u(&self, _: f64, _: f64, _: f64) -> Jet {
        Jet::default()
    }
    fn f(&self, _: f64, _: f64, _: f64) -> Jet {
        Jet::default()
    }
    fn w(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
    fn h(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// `u = e^-t sin x (e^-z - e^-2z)`, `f = e^-t cos x e^-z^2`.
pub struct DecayingModes;

impl Manufactured for DecayingModes {
    fn u(&self, x: f64, z: f64, t: f64) -> Jet {
        let a = (-t).exp();
        let (e1, e2) = ((-z).exp(), (-2.0 * z).exp());
        let (phi, dphi, ddphi) = (e1 - e2, -e1 + 2.0 * e2, e1 - 4.0 * e2);
        let v = a * x.sin() * phi;
        Jet {
            v,
            t: -v,
            x: a * x.cos() * phi,
            z: a * x.sin() * dphi,
            xx: -v,
            zz: a * x.sin() * ddphi,
        }
    }

    fn f(&self, x: f64, z: f64, t: f64) -> Jet {
        let a = (-t).exp();
        let g = (-z * z).exp();
        let v = a * x.cos() * g;
        Jet {
            v,
            t: -v,
            x: -a * x.sin() * g,
            z: a * x.cos() * (-2.0 * z * g),
            xx: -v,
            zz: a * x.cos() * (4.0 * z * z - 2.0) * g,
        }
    }

    fn w(&self, x: f64, z: f64, t: f64) -> f64 {
        let primitive = (1.0 - (-z).exp()) - 0.5 * (1.0 - (-2.0 * z).exp());
        -(-t).exp() * x.cos() * primitive
    }

    fn h(&self, x: f64, z: f64, t: f64) -> f64 {
        (-t).exp() * x.sin() * 0.5 * std::f64::consts::PI.sqrt() * erf(z)
    }
}

/// Source that makes `exact` solve the forced regularized system.
pub struct ManufacturedForcing<'a, M: Manufactured> {
    pub exact: &'a M,
}

impl<M: Manufactured> Forcing for ManufacturedForcing<'_, M> {
    fn forcing(&self, grid: &Arc<Grid>, t: f64) -> Tendency {
        let c = &grid.config;
        // physical layout is ix * nz + j
        let mut su = Vec::with_capacity(grid.len());
        let mut sf = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx() {
            let x = grid.x_coord(ix);
            for &z in &grid.z_levels {
                let u = self.exact.u(x, z, t);
                let f = self.exact.f(x, z, t);
                let w = self.exact.w(x, z, t);
                let h = self.exact.h(x, z, t);
                su.push(
                    u.t + u.v * u.x + w * u.z - c.nu * u.zz - c.eps * u.xx
                        - (f.v * f.x + h * f.z),
                );
                sf.push(
                    f.t + u.v * f.x + w * f.z - c.mu * f.zz - c.eps * f.xx
                        - (f.v * u.x + h * u.z),
                );
            }
        }
        Tendency {
            du: vec![Field::from_physical_dealiased(grid, &su)],
            df: vec![Field::from_physical_dealiased(grid, &sf)],
        }
    }
}

/// Max-norm error of `state` against `exact` at `state.t` on grid points.
pub fn max_error<M: Manufactured>(state: &State, exact: &M) -> f64 {
    let grid = state.grid();
    let u = state.u_h[0].to_physical();
    let f = state.f_h[0].to_physical();
    let nz = grid.nz();
    let mut err: f64 = 0.0;
    for ix in 0..grid.nx() {
        let x = grid.x_coord(ix);
        for (j, &z) in grid.z_levels.iter().enumerate() {
            let i = ix * nz + j;
            err = err
                .max((u[i] - exact.u(x, z, state.t).v).abs())
                .max((f[i] - exact.f(x, z, state.t).v).abs());
        }
    }
    err
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsConfig {
    /// Base domain; `nz` and `nx` are overridden per rung.
    pub domain: DomainConfig,
    pub t_final: f64,
    pub nz_ladder: Vec<usize>,
    /// Step for the normal ladder; each rung also runs at `dt / 2` and the
    /// pair is extrapolated in time.
    pub dt_spatial: f64,
    pub nz_temporal: usize,
    pub dt_ladder: Vec<f64>,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            domain: DomainConfig {
                nx: 64,
                nz: 64,
                zmax: 16.0,
                stretch: 3.0,
                nu: 1.0,
                mu: 0.5,
                eps: 0.0,
                ..DomainConfig::default()
            },
            t_final: 0.1,
            nz_ladder: vec![64, 128, 256, 512],
            dt_spatial: 2e-3,
            nz_temporal: 128,
            dt_ladder: vec![2e-2, 1e-2, 5e-3, 2.5e-3],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rung {
    pub nx: usize,
    pub nz: usize,
    pub dt: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub spatial: Vec<Rung>,
    pub spatial_orders: Vec<f64>,
    pub temporal: Vec<Rung>,
    /// Richardson orders from successive solution differences.
    pub temporal_orders: Vec<f64>,
    /// Largest pointwise gap between `Nx` and `2 Nx` solutions at the
    /// coarse points, at the finest normal rung.
    pub x_refinement_gap: f64,
}

impl ConvergenceTable {
    pub fn min_spatial_order(&self) -> f64 {
        self.spatial_orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn min_temporal_order(&self) -> f64 {
        self.temporal_orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn solve<M: Manufactured>(exact: &M, domain: &DomainConfig, dt: f64, t_final: f64) -> Result<State> {
    let grid = Grid::new(domain.clone())?;
    let initial = exact.state(&grid, 0.0)?;
    let cfg = SolverConfig {
        dt,
        t_final,
        cfl_safety: 1.0,
        imex: true,
        checkpoint_every: usize::MAX,
        model: super::Model::Mhd,
    };
    let forcing = ManufacturedForcing { exact };
    let traj = run_trajectory(&initial, &cfg, Some(&forcing))?;
    Ok(traj.last().clone())
}

fn order(e_coarse: f64, e_fine: f64, h_ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / h_ratio.ln()
}

/// Runs the normal-direction and time-step ladders against `exact`.
pub fn manufactured_forcing_residual<M: Manufactured>(
    exact: &M,
    cfg: &MmsConfig,
) -> Result<ConvergenceTable> {
    let mut spatial = Vec::new();
    let mut finest: Option<(DomainConfig, State)> = None;
    for &nz in &cfg.nz_ladder {
        let dom = DomainConfig {
            nz,
            ..cfg.domain.clone()
        };
        let coarse = solve(exact, &dom, cfg.dt_spatial, cfg.t_final)?;
        let fine = solve(exact, &dom, 0.5 * cfg.dt_spatial, cfg.t_final)?;
        // 2 U(dt/2) - U(dt) removes the first-order time error
        let mut u = fine.u_h[0].scale(2.0);
        u.axpy(-1.0, &coarse.u_h[0]);
        let mut f = fine.f_h[0].scale(2.0);
        f.axpy(-1.0, &coarse.f_h[0]);
        let extrap = State::new(fine.t, vec![u], vec![f])?;
        let error = max_error(&extrap, exact);
        info!("mms normal rung nz={nz}: error {error:.3e}");
        spatial.push(Rung {
            nx: dom.nx,
            nz,
            dt: cfg.dt_spatial,
            error,
        });
        finest = Some((dom, fine));
    }
    let spatial_orders = spatial
        .windows(2)
        .map(|p| order(p[0].error, p[1].error, (p[1].nz - 1) as f64 / (p[0].nz - 1) as f64))
        .collect();

    let dom_t = DomainConfig {
        nz: cfg.nz_temporal,
        ..cfg.domain.clone()
    };
    let mut temporal = Vec::new();
    let mut sols = Vec::new();
    for &dt in &cfg.dt_ladder {
        let s = solve(exact, &dom_t, dt, cfg.t_final)?;
        let error = max_error(&s, exact);
        info!("mms time rung dt={dt}: error {error:.3e}");
        temporal.push(Rung {
            nx: dom_t.nx,
            nz: dom_t.nz,
            dt,
            error,
        });
        sols.push(s);
    }
    let gaps: Vec<f64> = sols
        .windows(2)
        .map(|p| {
            let du = (&p[0].u_h[0] - &p[1].u_h[0]).max_abs_physical();
            let df = (&p[0].f_h[0] - &p[1].f_h[0]).max_abs_physical();
            du.max(df)
        })
        .collect();
    let temporal_orders = gaps
        .windows(2)
        .zip(cfg.dt_ladder.windows(2))
        .map(|(g, d)| order(g[0], g[1], d[0] / d[1]))
        .collect();

    let x_refinement_gap = match finest {
        Some((dom, fine)) => {
            let dom2 = DomainConfig {
                nx: 2 * dom.nx,
                ..dom.clone()
            };
            let fine2 = solve(exact, &dom2, 0.5 * cfg.dt_spatial, cfg.t_final)?;
            coarse_point_gap(&fine, &fine2)
        }
        None => 0.0,
    };

    Ok(ConvergenceTable {
        spatial,
        spatial_orders,
        temporal,
        temporal_orders,
        x_refinement_gap,
    })
}

/// Pointwise gap between two solutions on grids with `Nx` and `2 Nx`, taken
/// at the coarse tangential points.
fn coarse_point_gap(a: &State, b: &State) -> f64 {
    let nz = a.grid().nz();
    let nx = a.grid().nx();
    let mut gap: f64 = 0.0;
    for (fa, fb) in [(&a.u_h[0], &b.u_h[0]), (&a.f_h[0], &b.f_h[0])] {
        let pa = fa.to_physical();
        let pb = fb.to_physical();
        for ix in 0..nx {
            for j in 0..nz {
                gap = gap.max((pa[ix * nz + j] - pb[2 * ix * nz + j]).abs());
            }
        }
    }
    gap
}
