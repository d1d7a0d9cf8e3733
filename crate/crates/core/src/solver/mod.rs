//! Time integration of the tangentially regularized MHD boundary-layer
//! system: explicit midpoint RK2 for transport and the magnetic coupling,
//! backward Euler for normal diffusion and the tangential regularization.

pub mod implicit;
pub mod mms;

use std::sync::Arc;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::field::{Field, Physical};
use crate::grid::{DomainConfig, Grid};
use crate::state::{State, Tendency};

pub use implicit::{solve_diffusion, Bc};

/// Which equations the stepper integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Model {
    /// Full MHD boundary-layer system.
    #[default]
    Mhd,
    /// Prandtl system; the magnetic components are never touched.
    Prandtl,
    /// Transport and coupling switched off; only diffusion and forcing.
    Diffusion,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Mhd => "mhd",
            Model::Prandtl => "prandtl",
            Model::Diffusion => "diffusion",
        }
    }

    pub fn from_name(s: &str) -> Option<Model> {
        match s {
            "mhd" => Some(Model::Mhd),
            "prandtl" => Some(Model::Prandtl),
            "diffusion" => Some(Model::Diffusion),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub cfl_safety: f64,
    /// Implicit diffusion; `false` integrates everything with explicit RK2.
    pub imex: bool,
    pub checkpoint_every: usize,
    pub model: Model,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_final: 0.5,
            cfl_safety: 0.5,
            imex: true,
            checkpoint_every: 10,
            model: Model::Mhd,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, value: String, allowed: &str| Error::Range {
            key: key.into(),
            value,
            allowed: allowed.into(),
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", self.dt.to_string(), "dt > 0"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(bad("t_final", self.t_final.to_string(), "t_final > 0"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(bad(
                "cfl_safety",
                self.cfl_safety.to_string(),
                "0 < cfl_safety <= 1",
            ));
        }
        if self.checkpoint_every == 0 {
            return Err(bad("checkpoint_every", "0".into(), ">= 1"));
        }
        Ok(())
    }

    /// Number of steps; `t_final` is rounded to a whole number of `dt`.
    pub fn n_steps(&self) -> usize {
        let n = (self.t_final / self.dt).round().max(1.0) as usize;
        if ((n as f64) * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            warn!(
                "t_final = {} is not a multiple of dt = {}; integrating to {}",
                self.t_final,
                self.dt,
                n as f64 * self.dt
            );
        }
        n
    }
}

/// Time-dependent source added to the explicit tendency.
pub trait Forcing: Sync {
    fn forcing(&self, grid: &Arc<Grid>, t: f64) -> Tendency;
}

/// Checkpointed solution history.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub domain: DomainConfig,
    pub solver: SolverConfig,
    pub checkpoints: Vec<State>,
    /// Set when the run stopped at the blow-up threshold.
    pub truncated: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|s| s.t).collect()
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.checkpoints[0].grid()
    }

    pub fn last(&self) -> &State {
        self.checkpoints.last().expect("trajectory has the initial state")
    }
}

/// Full right-hand side `(dt u_h, dt f_h)` of the regularized system, with
/// tangential regularization `eps`.
pub fn rhs_regularized(state: &State, eps: f64) -> Tendency {
    let mut n = transport_part(state, Model::Mhd);
    add_linear(&mut n, state, eps, Model::Mhd);
    n
}

/// `-(u . grad) u_h + (f . grad) f_h` and `-(u . grad) f_h + (f . grad) u_h`.
fn transport_part(state: &State, model: Model) -> Tendency {
    let grid = state.grid();
    if model == Model::Diffusion {
        return Tendency::zeros(grid);
    }
    let vel = state.velocity_transport();
    let du: Vec<Field>;
    let df: Vec<Field>;
    match model {
        Model::Prandtl => {
            du = state
                .u_h
                .iter()
                .map(|u| {
                    // `0 - a` rather than `-a`: same bits as the MHD path with f = 0
                    let mut p = vel.apply_physical(u);
                    p.values.iter_mut().for_each(|v| *v = 0.0 - *v);
                    p.into_field(grid)
                })
                .collect();
            df = vec![Field::zeros(grid); state.f_h.len()];
        }
        _ => {
            let mag = state.magnetic_transport();
            let combine = |adv: Physical, lorentz: Physical| {
                let values = lorentz
                    .values
                    .iter()
                    .zip(&adv.values)
                    .map(|(l, a)| l - a)
                    .collect();
                Physical { values }.into_field(grid)
            };
            du = state
                .u_h
                .iter()
                .zip(&state.f_h)
                .map(|(u, f)| combine(vel.apply_physical(u), mag.apply_physical(f)))
                .collect();
            df = state
                .u_h
                .iter()
                .zip(&state.f_h)
                .map(|(u, f)| combine(vel.apply_physical(f), mag.apply_physical(u)))
                .collect();
        }
    }
    Tendency { du, df }
}

/// Adds `nu dz^2 u_h + eps lap_h u_h` and `mu dz^2 f_h + eps lap_h f_h`.
fn add_linear(n: &mut Tendency, state: &State, eps: f64, model: Model) {
    let cfg = &state.grid().config;
    for (acc, u) in n.du.iter_mut().zip(&state.u_h) {
        acc.axpy(cfg.nu, &u.d2dz2());
        if eps != 0.0 {
            acc.axpy(eps, &u.tangential_laplacian());
        }
    }
    if model == Model::Prandtl {
        return;
    }
    for (acc, f) in n.df.iter_mut().zip(&state.f_h) {
        acc.axpy(cfg.mu, &f.d2dz2());
        if eps != 0.0 {
            acc.axpy(eps, &f.tangential_laplacian());
        }
    }
}

fn explicit_tendency(
    state: &State,
    cfg: &SolverConfig,
    forcing: Option<&dyn Forcing>,
) -> Tendency {
    let mut n = transport_part(state, cfg.model);
    if !cfg.imex {
        add_linear(&mut n, state, state.grid().config.eps, cfg.model);
    }
    if let Some(src) = forcing {
        let s = src.forcing(state.grid(), state.t);
        for (a, b) in n.du.iter_mut().zip(&s.du) {
            a.axpy(1.0, b);
        }
        if cfg.model != Model::Prandtl {
            for (a, b) in n.df.iter_mut().zip(&s.df) {
                a.axpy(1.0, b);
            }
        }
    }
    n
}

/// `base + c n`, then the implicit solve over a step of length `c` when
/// `imex` is on; boundary conditions hold on return.
fn stage(base: &State, n: &Tendency, c: f64, t: f64, cfg: &SolverConfig) -> State {
    let grid = Arc::clone(base.grid());
    let dc = &grid.config;
    let advance = |x: &Field, nx: &Field| {
        let mut y = x.clone();
        y.axpy(c, nx);
        y
    };
    let mut u_h: Vec<Field> = base
        .u_h
        .iter()
        .zip(&n.du)
        .map(|(x, nx)| advance(x, nx))
        .collect();
    let mut f_h: Vec<Field> = if cfg.model == Model::Prandtl {
        base.f_h.clone()
    } else {
        base.f_h
            .iter()
            .zip(&n.df)
            .map(|(x, nx)| advance(x, nx))
            .collect()
    };
    if cfg.imex {
        for u in u_h.iter_mut() {
            *u = solve_diffusion(u, c * dc.nu, c * dc.eps, Bc::Dirichlet, Bc::Dirichlet);
        }
        if cfg.model != Model::Prandtl {
            for f in f_h.iter_mut() {
                *f = solve_diffusion(f, c * dc.mu, c * dc.eps, Bc::Neumann, Bc::Neumann);
            }
        }
    } else {
        for u in u_h.iter_mut() {
            crate::state::enforce_dirichlet(u);
        }
        if cfg.model != Model::Prandtl {
            for f in f_h.iter_mut() {
                crate::state::enforce_neumann(f, &grid);
            }
        }
    }
    let mut s = State {
        t,
        w: Field::zeros(&grid),
        h: Field::zeros(&grid),
        u_h,
        f_h,
    };
    s.refresh_normals();
    s
}

/// Checks the explicit stability bounds for `state` and step `dt`.
pub fn check_cfl(state: &State, dt: f64, cfg: &SolverConfig) -> Result<()> {
    let grid = state.grid();
    let mut dx = grid.dx();
    if grid.dim() == 3 {
        dx = dx.min(grid.config.ly / grid.ny() as f64);
    }
    let dz = grid.dz_min();
    let limit = cfg.cfl_safety;
    let tangential = dt * state.velocity_max() / dx;
    if tangential > limit {
        return Err(Error::Cfl {
            constraint: "tangential advection dt*max|u|/dx",
            ratio: tangential,
            limit,
        });
    }
    let normal = dt * state.w.max_abs_physical() / dz;
    if normal > limit {
        return Err(Error::Cfl {
            constraint: "normal advection dt*max|w|/dz_min",
            ratio: normal,
            limit,
        });
    }
    if !cfg.imex {
        let c = &grid.config;
        let kmax = std::f64::consts::PI / dx;
        let diff = dt * (2.0 * c.nu.max(c.mu) / (dz * dz) + c.eps * kmax * kmax);
        if diff > limit {
            return Err(Error::Cfl {
                constraint: "explicit diffusion dt*(2*max(nu,mu)/dz_min^2 + eps*kmax^2)",
                ratio: diff,
                limit,
            });
        }
    }
    Ok(())
}

/// One step of length `dt`.
pub fn imex_step(
    state: &State,
    dt: f64,
    cfg: &SolverConfig,
    forcing: Option<&dyn Forcing>,
) -> Result<State> {
    check_cfl(state, dt, cfg)?;
    let n0 = explicit_tendency(state, cfg, forcing);
    let mid = stage(state, &n0, 0.5 * dt, state.t + 0.5 * dt, cfg);
    let n1 = explicit_tendency(&mid, cfg, forcing);
    let next = stage(state, &n1, dt, state.t + dt, cfg);
    if !next.is_finite() {
        return Err(Error::NonFinite {
            last_valid_time: state.t,
        });
    }
    Ok(next)
}

/// Integrates `initial` to `cfg.t_final`, keeping every
/// `cfg.checkpoint_every`-th state plus the first and last.
pub fn run_trajectory(
    initial: &State,
    cfg: &SolverConfig,
    forcing: Option<&dyn Forcing>,
) -> Result<Trajectory> {
    run_trajectory_with(initial, cfg, forcing, |_, _, _| Ok(()))
}

/// As [`run_trajectory`]; `observer(prev, next, is_checkpoint)` runs after
/// every step and may abort the run with an error.
pub fn run_trajectory_with(
    initial: &State,
    cfg: &SolverConfig,
    forcing: Option<&dyn Forcing>,
    mut observer: impl FnMut(&State, &State, bool) -> Result<()>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = initial.grid();
    grid.config.validate()?;
    initial.check_compatibility()?;
    let mut state = initial.apply_boundary_conditions();
    state.t = 0.0;

    let n_steps = cfg.n_steps();
    // zero data cannot blow up; skip the relative test
    let reference = initial.velocity_max().max(
        initial
            .f_h
            .iter()
            .map(Field::max_abs_physical)
            .fold(0.0, f64::max),
    );
    let mut traj = Trajectory {
        domain: grid.config.clone(),
        solver: cfg.clone(),
        checkpoints: vec![state.clone()],
        truncated: false,
    };
    for step in 1..=n_steps {
        let mut next = imex_step(&state, cfg.dt, cfg, forcing)?;
        next.t = step as f64 * cfg.dt;
        let is_ckpt = step % cfg.checkpoint_every == 0 || step == n_steps;
        observer(&state, &next, is_ckpt)?;
        let blown = reference > 0.0 && next.velocity_max() > 1e6 * reference;
        if is_ckpt || blown {
            traj.checkpoints.push(next.clone());
        }
        if blown {
            warn!(
                "velocity exceeded 1e6 x its initial size at t = {}; trajectory truncated",
                next.t
            );
            traj.truncated = true;
            break;
        }
        state = next;
    }
    debug!(
        "trajectory: {} steps, {} checkpoints",
        n_steps,
        traj.checkpoints.len()
    );
    Ok(traj)
}
