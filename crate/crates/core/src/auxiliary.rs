//! Auxiliary fields: the passive linear problem for `V = int_0^z U`, the
//! combinations `lambda`, `delta`, `psi_m`, and residuals of the evolution
//! equations they satisfy.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::series::{interior_norm, interior_norm_all, time_derivative};
use crate::solver::{run_trajectory_with, solve_diffusion, Bc, Forcing, SolverConfig, Trajectory};
use crate::state::{nonlinear_xi_eta, State, Transport};

/// Auxiliary fields synchronized with a [`State`] at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxState {
    pub t: f64,
    /// `[U]` in 2D, `[U1, U2]` in 3D.
    pub u_aux: Vec<Field>,
    /// `V_i = int_0^z U_i`.
    pub v_int: Vec<Field>,
    /// `[lambda]`; in 3D `[lambda1, lambda2, lambda~1, lambda~2]`.
    pub lambda: Vec<Field>,
    /// `[delta]`; in 3D `[delta1, delta2, delta~1, delta~2]`.
    pub delta: Vec<Field>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuxTrajectory {
    pub checkpoints: Vec<AuxState>,
}

impl AuxState {
    /// `U = V = 0`, `lambda = dx u`, `delta = dx f`.
    pub fn initial(state: &State) -> AuxState {
        let grid = state.grid();
        let n = grid.dim() - 1;
        let aux = AuxState {
            t: state.t,
            u_aux: vec![Field::zeros(grid); n],
            v_int: vec![Field::zeros(grid); n],
            lambda: Vec::new(),
            delta: Vec::new(),
        };
        compute_lambda_delta(state, &aux)
    }

    /// `dz U` at the wall, which the passive problem should drive to zero.
    pub fn wall_flux(&self) -> f64 {
        let grid = Arc::clone(self.u_aux[0].grid());
        let nz = grid.nz();
        self.u_aux
            .iter()
            .map(|u| {
                let d = u.ddz();
                (0..grid.n_modes())
                    .map(|k| d.data()[k * nz].norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn tangential_derivative(f: &Field, dir: usize) -> Field {
    if dir == 0 {
        f.ddx()
    } else {
        f.ddy()
    }
}

/// Forcing `-dx w` (or `-dy w`) for component `dir`.
fn v_forcing(state: &State, dir: usize) -> Field {
    tangential_derivative(&state.w, dir).scale(-1.0)
}

/// Explicit part `-(u . grad) V - d_dir w`.
fn v_explicit(transport: &Transport, v: &Field, forcing: &Field) -> Field {
    let mut n = transport.apply(v).scale(-1.0);
    n.axpy(1.0, forcing);
    n
}

fn enforce_v_bcs(v: &mut Field) {
    let grid = Arc::clone(v.grid());
    let nz = grid.nz();
    let top = grid.d1[nz - 1];
    for k in 0..grid.n_modes() {
        let col = v.column_mut(k);
        col[0] = Default::default();
        let s = top.start;
        col[nz - 1] = -(col[s] * top.w[0] + col[s + 1] * top.w[1]) / top.w[2];
    }
}

fn check_sync(aux_t: f64, state_t: f64) -> Result<()> {
    if (aux_t - state_t).abs() > 1e-12 * state_t.abs().max(1.0) {
        return Err(Error::Desynchronized {
            aux: aux_t,
            state: state_t,
        });
    }
    Ok(())
}

/// Transport and forcing of the `V` problem at one instant.
struct VCoefficients<'a> {
    transport: &'a Transport,
    forcing: &'a Field,
}

/// One step of a single `V` component: first stage with coefficients at the
/// start of the step, second stage with coefficients at the midpoint.
fn step_v(v: &Field, start: VCoefficients, mid: VCoefficients, nu: f64, dt: f64, imex: bool) -> Field {
    let stage = |n: &Field, c: f64| {
        let mut y = v.clone();
        y.axpy(c, n);
        if imex {
            solve_diffusion(&y, c * nu, 0.0, Bc::Dirichlet, Bc::Neumann)
        } else {
            enforce_v_bcs(&mut y);
            y
        }
    };
    let explicit = |x: &Field, c: &VCoefficients| {
        let mut n = v_explicit(c.transport, x, c.forcing);
        if !imex {
            n.axpy(nu, &x.d2dz2());
        }
        n
    };
    let half = stage(&explicit(v, &start), 0.5 * dt);
    stage(&explicit(&half, &mid), dt)
}

/// One step of the `V` problem: midpoint RK2 for transport and forcing (the
/// midpoint coefficients average `now` and `next`), backward Euler for
/// `nu dz^2` (or fully explicit when `imex` is false). `V(0) = 0`, Neumann
/// at the top.
pub fn advance_u_with(
    aux: &AuxState,
    now: &State,
    next: &State,
    dt: f64,
    imex: bool,
) -> Result<AuxState> {
    check_sync(aux.t, now.t)?;
    let nu = now.grid().config.nu;
    let transport = now.velocity_transport();
    let average = |a: &Field, b: &Field| {
        let mut m = a.scale(0.5);
        m.axpy(0.5, b);
        m
    };
    let u_mid: Vec<Field> = now.u_h.iter().zip(&next.u_h).map(|(a, b)| average(a, b)).collect();
    let w_mid = average(&now.w, &next.w);
    let transport_mid = Transport::new(&u_mid, &w_mid);
    let v_new: Vec<Field> = aux
        .v_int
        .iter()
        .enumerate()
        .map(|(dir, v)| {
            let forcing = v_forcing(now, dir);
            let forcing_mid = tangential_derivative(&w_mid, dir).scale(-1.0);
            step_v(
                v,
                VCoefficients {
                    transport: &transport,
                    forcing: &forcing,
                },
                VCoefficients {
                    transport: &transport_mid,
                    forcing: &forcing_mid,
                },
                nu,
                dt,
                imex,
            )
        })
        .collect();
    let out = AuxState {
        t: next.t,
        u_aux: v_new.iter().map(Field::ddz).collect(),
        v_int: v_new,
        lambda: Vec::new(),
        delta: Vec::new(),
    };
    Ok(compute_lambda_delta(next, &out))
}

/// IMEX step of the auxiliary problem from `now` to `next`.
pub fn advance_u(aux: &AuxState, now: &State, next: &State, dt: f64) -> Result<AuxState> {
    advance_u_with(aux, now, next, dt, true)
}

/// `a - (dz a) V`.
fn corrected(a_dir: Field, a: &Field, v: &Field) -> Field {
    let mut out = a_dir;
    out.axpy(-1.0, &a.ddz().product(v));
    out
}

/// Fills `lambda` and `delta` from the current `V`.
pub fn compute_lambda_delta(state: &State, aux: &AuxState) -> AuxState {
    let mut out = aux.clone();
    let n = aux.v_int.len();
    out.lambda.clear();
    out.delta.clear();
    // order: (u, dir 0), (u, dir 1), (v, dir 0), (v, dir 1)
    for (comps, target) in [(&state.u_h, &mut out.lambda), (&state.f_h, &mut out.delta)] {
        for a in comps.iter() {
            for dir in 0..n {
                target.push(corrected(
                    tangential_derivative(a, dir),
                    a,
                    &aux.v_int[dir],
                ));
            }
        }
    }
    out
}

/// Runs the solver with the auxiliary problem advanced in lockstep.
pub fn run_coupled(
    initial: &State,
    cfg: &SolverConfig,
    forcing: Option<&dyn Forcing>,
) -> Result<(Trajectory, AuxTrajectory)> {
    let start = initial.apply_boundary_conditions();
    let mut aux = AuxState::initial(&State { t: 0.0, ..start });
    let mut aux_traj = AuxTrajectory {
        checkpoints: vec![aux.clone()],
    };
    let traj = run_trajectory_with(initial, cfg, forcing, |now, next, is_ckpt| {
        aux = advance_u(&aux, now, next, next.t - now.t)?;
        if is_ckpt {
            aux_traj.checkpoints.push(aux.clone());
        }
        Ok(())
    })?;
    // a blow-up stop records a non-cadence final state
    if traj.checkpoints.len() > aux_traj.checkpoints.len() {
        aux_traj.checkpoints.push(aux);
    }
    Ok((traj, aux_traj))
}

fn check_pair(traj: &Trajectory, aux: &AuxTrajectory, need: usize) -> Result<Vec<f64>> {
    if aux.checkpoints.len() != traj.checkpoints.len() {
        return Err(Error::Unsupported(format!(
            "auxiliary trajectory has {} checkpoints, flow has {}",
            aux.checkpoints.len(),
            traj.checkpoints.len()
        )));
    }
    for (a, s) in aux.checkpoints.iter().zip(&traj.checkpoints) {
        check_sync(a.t, s.t)?;
    }
    if traj.len() < need {
        return Err(Error::TooFewCheckpoints {
            need,
            have: traj.len(),
        });
    }
    Ok(traj.times())
}

/// Signs applied to the terms of the `U` residual; all `1.0` for the true
/// equation. Used to build negative controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UResidualTerms {
    pub dx_lambda: f64,
    pub dxz_u_v: f64,
    pub dx_u_u: f64,
}

impl Default for UResidualTerms {
    fn default() -> Self {
        UResidualTerms {
            dx_lambda: 1.0,
            dxz_u_v: 1.0,
            dx_u_u: 1.0,
        }
    }
}

/// Residual of
/// `(dt + u.grad - nu dz^2) U = dx lambda + (dx dz u) V + (dx u) U`
/// (3D: `dx lambda_i + dy lambda~_i + (dx dz u + dy dz v) V_i + (dx u + dy v) U_i`)
/// per checkpoint, interior `L^2`.
pub fn u_equation_residual(traj: &Trajectory, aux: &AuxTrajectory) -> Result<Vec<f64>> {
    u_equation_residual_with(traj, aux, UResidualTerms::default())
}

pub fn u_equation_residual_with(
    traj: &Trajectory,
    aux: &AuxTrajectory,
    terms: UResidualTerms,
) -> Result<Vec<f64>> {
    Ok(u_residual_series(traj, aux, terms)?.0)
}

/// Residual norms and the largest term norm per checkpoint.
pub fn u_residual_series(
    traj: &Trajectory,
    aux: &AuxTrajectory,
    terms: UResidualTerms,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let times = check_pair(traj, aux, 3)?;
    let grid = Arc::clone(traj.grid());
    let n = grid.dim() - 1;
    let nu = grid.config.nu;
    let mut out = Vec::with_capacity(times.len());
    let mut scale = Vec::with_capacity(times.len());
    for (idx, (s, a)) in traj.checkpoints.iter().zip(&aux.checkpoints).enumerate() {
        let transport = s.velocity_transport();
        let mut div_u = s.u_h[0].ddx();
        if n > 1 {
            div_u.axpy(1.0, &s.u_h[1].ddy());
        }
        let div_uz = div_u.ddz();
        let mut comps = Vec::with_capacity(n);
        let mut parts: Vec<Vec<Field>> = vec![Vec::new(); 5];
        for i in 0..n {
            let series: Vec<&Field> = aux.checkpoints.iter().map(|c| &c.u_aux[i]).collect();
            let dt_u = time_derivative(&times, &series, idx, 1)?;
            let u = &a.u_aux[i];
            let adv = transport.apply(u);
            let diff = u.d2dz2().scale(nu);
            let mut r = dt_u.clone();
            r.axpy(1.0, &adv);
            r.axpy(-1.0, &diff);
            // lambda layout: [a=u: dir0, dir1, a=v: dir0, dir1]
            let mut rhs = a.lambda[i].ddx();
            if n > 1 {
                rhs.axpy(1.0, &a.lambda[n + i].ddy());
            }
            let rhs = rhs.scale(terms.dx_lambda);
            let stretch_v = div_uz.product(&a.v_int[i]);
            let stretch_u = div_u.product(u);
            r.axpy(-1.0, &rhs);
            r.axpy(-terms.dxz_u_v, &stretch_v);
            r.axpy(-terms.dx_u_u, &stretch_u);
            comps.push(r);
            for (p, f) in parts.iter_mut().zip([dt_u, adv, diff, rhs, stretch_v]) {
                p.push(f);
            }
        }
        out.push(interior_norm_all(&comps));
        scale.push(parts.iter().map(|p| interior_norm_all(p)).fold(0.0, f64::max));
    }
    Ok((out, scale))
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `psi_m = dx^m u - (dz u) int_0^z dx^{m-1} U` (2D).
pub fn psi_m(state: &State, aux: &AuxState, m: u32) -> Result<Field> {
    check_m(m, state.grid())?;
    let u = &state.u_h[0];
    let mut out = u.ddx_n(m);
    out.axpy(-1.0, &u.ddz().product(&aux.v_int[0].ddx_n(m - 1)));
    Ok(out)
}

fn check_m(m: u32, grid: &Grid) -> Result<()> {
    if !(1..=3).contains(&m) {
        return Err(Error::Range {
            key: "m".into(),
            value: m.to_string(),
            allowed: "1 <= m <= 3".into(),
        });
    }
    if grid.dim() != 2 {
        return Err(Error::Unsupported("psi_m residual is two-dimensional".into()));
    }
    Ok(())
}

/// Residual of the `psi_m` equation per checkpoint (2D, `1 <= m <= 3`):
///
/// `(dt + u dx + w dz - nu dz^2) psi_m - [dx^m xi + F_m - L_m - (dz xi) dx^{m-1} V]`
/// minus the tangential-regularization terms
/// `eps dx^{m+2} u - eps (dx^2 dz u) dx^{m-1} V`.
pub fn psi_m_residual(traj: &Trajectory, aux: &AuxTrajectory, m: u32) -> Result<Vec<f64>> {
    Ok(psi_m_residual_series(traj, aux, m)?.0)
}

/// Residual norms and the largest term norm per checkpoint.
pub fn psi_m_residual_series(
    traj: &Trajectory,
    aux: &AuxTrajectory,
    m: u32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = Arc::clone(traj.grid());
    check_m(m, &grid)?;
    let times = check_pair(traj, aux, 3)?;
    let nu = grid.config.nu;
    let eps = grid.config.eps;
    let psis: Vec<Field> = traj
        .checkpoints
        .iter()
        .zip(&aux.checkpoints)
        .map(|(s, a)| psi_m(s, a, m))
        .collect::<Result<_>>()?;
    let refs: Vec<&Field> = psis.iter().collect();
    let mut out = Vec::with_capacity(times.len());
    let mut scale = Vec::with_capacity(times.len());
    for (idx, (s, a)) in traj.checkpoints.iter().zip(&aux.checkpoints).enumerate() {
        let u = &s.u_h[0];
        let w = &s.w;
        let v = &a.v_int[0];
        let uu = &a.u_aux[0];
        let psi = &psis[idx];
        let (uz, uzz) = (u.ddz(), u.d2dz2());
        let xi = &nonlinear_xi_eta(s).xi[0];
        let dx = |f: &Field, k: u32| f.ddx_n(k);

        let dt_psi = time_derivative(&times, &refs, idx, 1)?;
        let adv = s.velocity_transport().apply(psi);
        let diff = psi.d2dz2().scale(nu);
        let mut r = dt_psi.clone();
        r.axpy(1.0, &adv);
        r.axpy(-1.0, &diff);

        // F_m
        let mut f_m = Field::zeros(&grid);
        for j in 1..=m {
            f_m.axpy(-binom(m, j), &dx(u, j).product(&dx(u, m - j + 1)));
        }
        for j in 1..m {
            f_m.axpy(-binom(m, j), &dx(w, j).product(&dx(&uz, m - j)));
        }
        // L_m
        let mut sum = Field::zeros(&grid);
        for j in 1..m {
            let c = binom(m - 1, j);
            sum.axpy(c, &dx(u, j).product(&dx(v, m - j)));
            sum.axpy(c, &dx(w, j).product(&dx(uu, m - 1 - j)));
        }
        let mut l_m = uz.product(&sum).scale(-1.0);
        l_m.axpy(-2.0 * nu, &uzz.product(&dx(uu, m - 1)));

        let mut rhs = dx(xi, m);
        rhs.axpy(1.0, &f_m);
        rhs.axpy(-1.0, &l_m);
        rhs.axpy(-1.0, &xi.ddz().product(&dx(v, m - 1)));
        if eps != 0.0 {
            rhs.axpy(eps, &dx(u, m + 2));
            rhs.axpy(-eps, &dx(&uz, 2).product(&dx(v, m - 1)));
        }
        r.axpy(-1.0, &rhs);
        out.push(interior_norm(&r));
        scale.push(
            [&dt_psi, &adv, &diff, &rhs]
                .iter()
                .map(|f| interior_norm(f))
                .fold(0.0, f64::max),
        );
    }
    Ok((out, scale))
}
