//! Gevrey seminorms, the composite norm over the solution and its auxiliary
//! fields, and radius-of-analyticity fits.
//!
//! Everything is evaluated in the log domain: `rho^n / (n!)^sigma` underflows
//! long before the suprema are reached. For decaying spectra the terms are
//! eventually decreasing in `m` (the factorial dominates `|k_max|^m`), so
//! once a term has passed its peak and dropped below `1e-300` no later term
//! can exceed the retained maximum; that is where the `m` loop stops.

use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::auxiliary::{AuxState, AuxTrajectory};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::series::derivative_weights;
use crate::solver::{rhs_regularized, Trajectory};
use crate::state::{reconstruct_normal, nonlinear_xi_eta, State, Transport};

/// `ln(1e-300)`.
pub const LN_FLOOR: f64 = -690.775_527_898_213_7;

const HARD_M_LIMIT: u32 = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct GevreyParams {
    pub rho: f64,
    pub sigma: f64,
    /// Largest normal-derivative order.
    pub n_max: u32,
    /// Largest time-derivative order.
    pub i_max: u32,
    pub offset_uf: u32,
    pub offset_aux: u32,
    /// `<z>^{ell+j}` weight on the velocity/magnetic entries of the
    /// composite norm.
    pub weighted_uf: bool,
    /// Fixed truncation in `m` instead of the automatic cutoff.
    pub m_max: Option<u32>,
}

impl Default for GevreyParams {
    fn default() -> Self {
        GevreyParams {
            rho: 0.5,
            sigma: 1.5,
            n_max: 4,
            i_max: 1,
            offset_uf: 7,
            offset_aux: 6,
            weighted_uf: true,
            m_max: None,
        }
    }
}

/// Largest normal-derivative order the finite-difference operators support.
pub const MAX_NORMAL_ORDER: u32 = 8;

impl GevreyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Range {
                key: "rho".into(),
                value: self.rho.to_string(),
                allowed: "rho > 0".into(),
            });
        }
        if !(self.sigma > 1.0 && self.sigma <= 1.5) {
            return Err(Error::Range {
                key: "sigma".into(),
                value: self.sigma.to_string(),
                allowed: "1<σ≤3/2 (the admissible Gevrey indices of the well-posedness theorem)"
                    .into(),
            });
        }
        if self.i_max > 4 {
            return Err(Error::Range {
                key: "i_max".into(),
                value: self.i_max.to_string(),
                allowed: "0 <= i_max <= 4".into(),
            });
        }
        if self.n_max > MAX_NORMAL_ORDER {
            return Err(Error::Range {
                key: "n_max".into(),
                value: self.n_max.to_string(),
                allowed: format!("0 <= N <= {MAX_NORMAL_ORDER}"),
            });
        }
        Ok(())
    }
}

/// One tabulated seminorm term.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEntry {
    pub family: String,
    pub m: u32,
    pub i: u32,
    pub j: u32,
    pub log_value: f64,
}

/// Supremum of one family and where it is attained.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyValue {
    pub name: String,
    pub log_value: f64,
    pub argmax: Option<(u32, u32, u32)>,
}

/// Table of log-domain terms with the per-family suprema.
///
/// For [`composite_norm_a`], `log_value` is the maximum over the families;
/// for [`seminorm_x`] it is the sum of the high- and low-order suprema.
/// A zero field gives `-inf` entries and value `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub entries: Vec<NormEntry>,
    pub families: Vec<FamilyValue>,
    pub log_value: f64,
    /// Largest tangential order evaluated.
    pub m_max: u32,
    pub offset_uf: u32,
    pub offset_aux: u32,
    pub weighted_uf: bool,
}

impl NormReport {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    /// Alias of [`NormReport::value`].
    pub fn composite(&self) -> f64 {
        self.value()
    }

    /// Sum of the family suprema.
    pub fn composite_sum(&self) -> f64 {
        self.families.iter().map(|f| f.log_value.exp()).sum()
    }

    pub fn family(&self, name: &str) -> Option<&FamilyValue> {
        self.families.iter().find(|f| f.name == name)
    }

    /// Family attaining the supremum (`None` when everything vanishes).
    pub fn dominant(&self) -> Option<&str> {
        self.families
            .iter()
            .filter(|f| f.log_value > f64::NEG_INFINITY)
            .max_by(|a, b| a.log_value.total_cmp(&b.log_value))
            .map(|f| f.name.as_str())
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn ln_factorial(n: u32) -> f64 {
    // ln_gamma is only good to ~1e-10 relative; direct sums are exact to rounding
    if n <= 256 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Per-mode energies `c_k = area sum_z w (1+z^2)^q |dz^j a_k|^2` of a group
/// of fields, with `ln |k|` alongside.
#[derive(Clone, Debug)]
struct Spectrum {
    log_k: Vec<f64>,
    log_c: Vec<f64>,
}

impl Spectrum {
    fn of(fields: &[&Field], q: f64, j: u32) -> Spectrum {
        let mut log_k = Vec::new();
        let mut log_c = Vec::new();
        for f in fields {
            let grid = f.grid();
            let nz = grid.nz();
            let g = if j == 0 { (*f).clone() } else { f.ddz_n(j) };
            let wz: Vec<f64> = grid
                .quad_weights
                .iter()
                .zip(&grid.bracket_sq)
                .map(|(w, b)| if q == 0.0 { *w } else { w * b.powf(q) })
                .collect();
            let area = grid.tangential_area();
            for (kidx, col) in g.data().chunks(nz).enumerate() {
                let c: f64 = col.iter().zip(&wz).map(|(v, w)| w * v.norm_sqr()).sum::<f64>() * area;
                if c <= 0.0 {
                    continue;
                }
                let (kx, ky) = grid.wavenumber(kidx);
                let k = (kx * kx + ky * ky).sqrt();
                log_k.push(if k == 0.0 { f64::NEG_INFINITY } else { k.ln() });
                log_c.push(c.ln());
            }
        }
        Spectrum { log_k, log_c }
    }

    fn term(&self, idx: usize, m: u32) -> f64 {
        let lk = self.log_k[idx];
        if m == 0 {
            self.log_c[idx]
        } else if lk == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            2.0 * m as f64 * lk + self.log_c[idx]
        }
    }

    /// `ln ||dx^m a||` (tangential order `m`, i.e. `|k|^m` mode weights).
    fn log_norm(&self, m: u32) -> f64 {
        let terms: Vec<f64> = (0..self.log_c.len()).map(|i| self.term(i, m)).collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = terms.iter().map(|t| (t - top).exp()).sum();
        0.5 * (top + s.ln())
    }

    /// Largest single-mode contribution `ln(|k|^m sqrt(c_k))`.
    fn log_max_mode(&self, m: u32) -> f64 {
        (0..self.log_c.len())
            .map(|i| 0.5 * self.term(i, m))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A family of the composite norm: norms of its members are added inside
/// the supremum, after an optional `m^power` factor.
struct Family {
    high: &'static str,
    low: Option<&'static str>,
    /// `spectra[i][j]` per member.
    members: Vec<Vec<Vec<Spectrum>>>,
    offset: u32,
    m_power: f64,
    /// Largest `j` admitted for time order `i`.
    j_limit: Box<dyn Fn(u32) -> u32>,
    /// Low part: `m + i + j <= low_limit`.
    low_limit: Option<u32>,
}

struct Table {
    entries: Vec<NormEntry>,
    families: Vec<FamilyValue>,
    m_max: u32,
}

impl Table {
    fn new() -> Table {
        Table {
            entries: Vec::new(),
            families: Vec::new(),
            m_max: 0,
        }
    }

    fn push(&mut self, family: &str, m: u32, i: u32, j: u32, log_value: f64) {
        self.m_max = self.m_max.max(m);
        self.entries.push(NormEntry {
            family: family.into(),
            m,
            i,
            j,
            log_value,
        });
        match self.families.iter_mut().find(|f| f.name == family) {
            Some(f) => {
                if log_value > f.log_value {
                    f.log_value = log_value;
                    f.argmax = Some((m, i, j));
                }
            }
            None => self.families.push(FamilyValue {
                name: family.into(),
                log_value,
                argmax: (log_value > f64::NEG_INFINITY).then_some((m, i, j)),
            }),
        }
    }

    fn ensure(&mut self, family: &str) {
        if !self.families.iter().any(|f| f.name == family) {
            self.families.push(FamilyValue {
                name: family.into(),
                log_value: f64::NEG_INFINITY,
                argmax: None,
            });
        }
    }
}

fn evaluate(fam: &Family, params: &GevreyParams, i_max: u32, table: &mut Table) {
    let ln_rho = params.rho.ln();
    let off = fam.offset;
    table.ensure(fam.high);
    if let Some(l) = fam.low {
        table.ensure(l);
    }
    for i in 0..=i_max {
        for j in 0..=(fam.j_limit)(i) {
            let member_log = |m: u32| {
                fam.members
                    .iter()
                    .map(|mem| mem[i as usize][j as usize].log_norm(m))
                    .fold(f64::NEG_INFINITY, ln_add)
            };
            let m_factor = |m: u32| {
                if fam.m_power == 0.0 {
                    0.0
                } else {
                    fam.m_power * (m as f64).ln()
                }
            };
            // low-order part, no Gevrey weight
            if let (Some(name), Some(lim)) = (fam.low, fam.low_limit) {
                if i + j <= lim {
                    for m in 0..=(lim - i - j) {
                        table.push(name, m, i, j, member_log(m));
                    }
                }
            }
            // high-order part
            let m_start = off.saturating_sub(i + j);
            let weight = |m: u32| {
                let n = m + i + j - off;
                n as f64 * ln_rho - params.sigma * ln_factorial(n) + m_factor(m)
            };
            let mut prev_peak = f64::NEG_INFINITY;
            let mut m = m_start;
            loop {
                let lv = weight(m) + member_log(m);
                table.push(fam.high, m, i, j, lv);
                let peak = fam
                    .members
                    .iter()
                    .map(|mem| mem[i as usize][j as usize].log_max_mode(m))
                    .fold(f64::NEG_INFINITY, f64::max)
                    + weight(m);
                if let Some(limit) = params.m_max {
                    if m >= limit {
                        break;
                    }
                } else if peak == f64::NEG_INFINITY
                    || (peak < LN_FLOOR && peak <= prev_peak)
                    || m >= HARD_M_LIMIT
                {
                    break;
                }
                prev_peak = peak;
                m += 1;
            }
        }
    }
}

fn spectra_by_ij(fields_by_i: &[Vec<Field>], q: impl Fn(u32) -> f64, j_limit: u32) -> Vec<Vec<Spectrum>> {
    fields_by_i
        .iter()
        .map(|fields| {
            let refs: Vec<&Field> = fields.iter().collect();
            (0..=j_limit).map(|j| Spectrum::of(&refs, q(j), j)).collect()
        })
        .collect()
}

/// Gevrey-class seminorm of the vector `fields`: high-order supremum over
/// `|alpha| + j >= offset_uf`, `j <= N`, plus the low-order supremum.
pub fn seminorm_x(fields: &[Field], params: &GevreyParams) -> Result<NormReport> {
    params.validate()?;
    let grid = fields
        .first()
        .map(|f| Arc::clone(f.grid()))
        .ok_or_else(|| Error::Unsupported("empty field list".into()))?;
    for f in fields {
        f.check_same_grid(&fields[0])?;
    }
    let ell = grid.config.ell;
    let n = params.n_max;
    let fam = Family {
        high: "high",
        low: Some("low"),
        members: vec![spectra_by_ij(&[fields.to_vec()], |j| ell + j as f64, n)],
        offset: params.offset_uf,
        m_power: 0.0,
        j_limit: Box::new(move |_| n),
        low_limit: Some(params.offset_uf - 1),
    };
    let mut table = Table::new();
    evaluate(&fam, params, 0, &mut table);
    let log_value = table
        .families
        .iter()
        .map(|f| f.log_value)
        .fold(f64::NEG_INFINITY, ln_add);
    Ok(NormReport {
        entries: table.entries,
        families: table.families,
        log_value,
        m_max: table.m_max,
        offset_uf: params.offset_uf,
        offset_aux: params.offset_aux,
        weighted_uf: true,
    })
}

/// Snapshot quantities entering the composite norm.
#[derive(Clone, Debug)]
pub struct CompositeFields {
    pub u_h: Vec<Field>,
    pub f_h: Vec<Field>,
    pub u_aux: Vec<Field>,
    pub lambda: Vec<Field>,
    pub delta: Vec<Field>,
    pub xi: Vec<Field>,
    pub eta: Vec<Field>,
}

impl CompositeFields {
    pub fn at(state: &State, aux: &AuxState) -> CompositeFields {
        let nl = nonlinear_xi_eta(state);
        CompositeFields {
            u_h: state.u_h.clone(),
            f_h: state.f_h.clone(),
            u_aux: aux.u_aux.clone(),
            lambda: aux.lambda.clone(),
            delta: aux.delta.clone(),
            xi: nl.xi,
            eta: nl.eta,
        }
    }

    /// First time derivatives by substituting the equations (chain rule
    /// through `V`, `lambda`, `delta`, `xi`, `eta`).
    pub fn time_derivative(state: &State, aux: &AuxState) -> CompositeFields {
        let grid = Arc::clone(state.grid());
        let eps = grid.config.eps;
        let nu = grid.config.nu;
        let tend = rhs_regularized(state, eps);
        let (ut, ft) = (tend.du, tend.df);
        let ht = reconstruct_normal(&ft);
        let vel = state.velocity_transport();

        let dir = |f: &Field, d: usize| if d == 0 { f.ddx() } else { f.ddy() };
        let vt: Vec<Field> = aux
            .v_int
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let mut r = vel.apply(v).scale(-1.0);
                r.axpy(-1.0, &dir(&state.w, d));
                r.axpy(nu, &v.d2dz2());
                r
            })
            .collect();
        let u_aux_t = vt.iter().map(Field::ddz).collect();

        let corrected_t = |a: &Field, at: &Field, d: usize| {
            let mut r = dir(at, d);
            r.axpy(-1.0, &at.ddz().product(&aux.v_int[d]));
            r.axpy(-1.0, &a.ddz().product(&vt[d]));
            r
        };
        let n = aux.v_int.len();
        let mut lambda = Vec::new();
        for (a, at) in state.u_h.iter().zip(&ut) {
            for d in 0..n {
                lambda.push(corrected_t(a, at, d));
            }
        }
        let mut delta = Vec::new();
        for (a, at) in state.f_h.iter().zip(&ft) {
            for d in 0..n {
                delta.push(corrected_t(a, at, d));
            }
        }

        let mag = state.magnetic_transport();
        let mag_t = Transport::new(&ft, &ht);
        let transport_t = |a: &Field, at: &Field| {
            let mut r = mag_t.apply(a);
            r.axpy(1.0, &mag.apply(at));
            r
        };
        let xi = state.f_h.iter().zip(&ft).map(|(a, at)| transport_t(a, at)).collect();
        let eta = state.u_h.iter().zip(&ut).map(|(a, at)| transport_t(a, at)).collect();
        CompositeFields {
            u_h: ut,
            f_h: ft,
            u_aux: u_aux_t,
            lambda,
            delta,
            xi,
            eta,
        }
    }

    fn combine(weights: &[(usize, f64)], items: &[CompositeFields]) -> CompositeFields {
        let lin = |pick: &dyn Fn(&CompositeFields) -> &Vec<Field>| -> Vec<Field> {
            let first = pick(&items[weights[0].0]);
            (0..first.len())
                .map(|c| {
                    let mut acc = Field::zeros(first[c].grid());
                    for &(idx, w) in weights {
                        acc.axpy(w, &pick(&items[idx])[c]);
                    }
                    acc
                })
                .collect()
        };
        CompositeFields {
            u_h: lin(&|c| &c.u_h),
            f_h: lin(&|c| &c.f_h),
            u_aux: lin(&|c| &c.u_aux),
            lambda: lin(&|c| &c.lambda),
            delta: lin(&|c| &c.delta),
            xi: lin(&|c| &c.xi),
            eta: lin(&|c| &c.eta),
        }
    }
}

/// Composite norm at checkpoint `t_index`: the maximum over the seven
/// families (velocity/magnetic high and low, `U` high and low,
/// `lambda`/`delta` with `m^{1/2}`, `xi`/`eta` with `m` and `<z>^ell`, and
/// the low-order auxiliary block).
pub fn composite_norm_a(
    traj: &Trajectory,
    aux: &AuxTrajectory,
    params: &GevreyParams,
    t_index: usize,
) -> Result<NormReport> {
    params.validate()?;
    if aux.checkpoints.len() != traj.checkpoints.len() {
        return Err(Error::Unsupported(format!(
            "missing auxiliary data: {} auxiliary checkpoints for {} states",
            aux.checkpoints.len(),
            traj.checkpoints.len()
        )));
    }
    if t_index >= traj.len() {
        return Err(Error::TooFewCheckpoints {
            need: t_index + 1,
            have: traj.len(),
        });
    }
    let i_max = params.i_max;
    let times = traj.times();

    // fields for i = 0, 1, and differenced first derivatives for i >= 2
    let snap = |idx: usize| CompositeFields::at(&traj.checkpoints[idx], &aux.checkpoints[idx]);
    let first = |idx: usize| {
        CompositeFields::time_derivative(&traj.checkpoints[idx], &aux.checkpoints[idx])
    };
    let mut by_i = vec![snap(t_index)];
    if i_max >= 1 {
        by_i.push(first(t_index));
    }
    if i_max >= 2 {
        let w = derivative_weights(&times, t_index, (i_max - 1) as usize)?;
        let lo = w.first().map(|p| p.0).unwrap_or(t_index);
        let hi = w.last().map(|p| p.0).unwrap_or(t_index);
        let firsts: Vec<CompositeFields> = (lo..=hi).map(first).collect();
        for i in 2..=i_max {
            let w: Vec<(usize, f64)> = derivative_weights(&times, t_index, (i - 1) as usize)?
                .into_iter()
                .map(|(idx, c)| (idx - lo, c))
                .collect();
            by_i.push(CompositeFields::combine(&w, &firsts));
        }
    }

    let grid: Arc<Grid> = Arc::clone(traj.grid());
    let ell = grid.config.ell;
    let n_max = params.n_max.min(4);
    let uf_q = |j: u32| if params.weighted_uf { ell + j as f64 } else { 0.0 };
    let pick = |f: &dyn Fn(&CompositeFields) -> Vec<Field>| -> Vec<Vec<Field>> {
        by_i.iter().map(f).collect()
    };
    let uf_j = move |i: u32| n_max.min(4 - i);

    let u_spec = spectra_by_ij(&pick(&|c| c.u_h.clone()), uf_q, n_max);
    let f_spec = spectra_by_ij(&pick(&|c| c.f_h.clone()), uf_q, n_max);
    let uaux = spectra_by_ij(&pick(&|c| c.u_aux.clone()), |_| 0.0, 0);
    let lam = spectra_by_ij(&pick(&|c| c.lambda.clone()), |_| 0.0, 0);
    let del = spectra_by_ij(&pick(&|c| c.delta.clone()), |_| 0.0, 0);
    let xi = spectra_by_ij(&pick(&|c| c.xi.clone()), |_| ell, 0);
    let eta = spectra_by_ij(&pick(&|c| c.eta.clone()), |_| ell, 0);

    let ouf = params.offset_uf;
    let oaux = params.offset_aux;
    let families = vec![
        Family {
            high: "uf",
            low: Some("uf_low"),
            members: vec![u_spec, f_spec],
            offset: ouf,
            m_power: 0.0,
            j_limit: Box::new(uf_j),
            low_limit: Some(ouf - 1),
        },
        Family {
            high: "U",
            low: Some("U_low"),
            members: vec![uaux],
            offset: oaux,
            m_power: 0.0,
            j_limit: Box::new(|_| 0),
            low_limit: Some(oaux - 1),
        },
        Family {
            high: "lambda_delta",
            low: None,
            members: vec![lam.clone(), del.clone()],
            offset: oaux,
            m_power: 0.5,
            j_limit: Box::new(|_| 0),
            low_limit: None,
        },
        Family {
            high: "xi_eta",
            low: None,
            members: vec![xi.clone(), eta.clone()],
            offset: oaux,
            m_power: 1.0,
            j_limit: Box::new(|_| 0),
            low_limit: None,
        },
        Family {
            high: "aux_low_unused",
            low: Some("aux_low"),
            members: vec![lam, del, xi, eta],
            offset: u32::MAX,
            m_power: 0.0,
            j_limit: Box::new(|_| 0),
            low_limit: Some(oaux - 1),
        },
    ];
    let mut table = Table::new();
    for fam in &families {
        if fam.offset == u32::MAX {
            evaluate_low_only(fam, i_max, &mut table);
        } else {
            evaluate(fam, params, i_max, &mut table);
        }
    }
    let log_value = table
        .families
        .iter()
        .map(|f| f.log_value)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(NormReport {
        entries: table.entries,
        families: table.families,
        log_value,
        m_max: table.m_max,
        offset_uf: ouf,
        offset_aux: oaux,
        weighted_uf: params.weighted_uf,
    })
}

fn evaluate_low_only(fam: &Family, i_max: u32, table: &mut Table) {
    let (Some(name), Some(lim)) = (fam.low, fam.low_limit) else {
        return;
    };
    table.ensure(name);
    for i in 0..=i_max.min(lim) {
        for m in 0..=(lim - i) {
            let lv = fam
                .members
                .iter()
                .map(|mem| mem[i as usize][0].log_norm(m))
                .fold(f64::NEG_INFINITY, ln_add);
            table.push(name, m, i, 0, lv);
        }
    }
}

/// Result of a radius fit.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusFit {
    pub rho: f64,
    /// Fitted constant `ln C`.
    pub log_c: f64,
    /// Largest absolute residual of the linear fit.
    pub max_residual: f64,
    /// Range of the fitted data.
    pub data_range: f64,
    /// `max_residual <= 0.1 * data_range`.
    pub good_fit: bool,
    pub modes_used: usize,
}

/// Least-squares fit of `ln a_m = ln C - (m - offset) ln rho
/// - sigma ln((m - offset)!)` over the given orders `m >= offset`.
pub fn fit_radius(ms: &[u32], amps: &[f64], sigma: f64, offset: u32) -> Result<RadiusFit> {
    let pts: Vec<(f64, f64)> = ms
        .iter()
        .zip(amps)
        .filter(|(m, a)| **m >= offset && **a > 0.0 && a.is_finite())
        .map(|(&m, &a)| {
            let n = m - offset;
            (n as f64, a.ln() + sigma * ln_factorial(n))
        })
        .collect();
    if pts.len() < 8 {
        return Err(Error::TooFewModes {
            need: 8,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    let data_range = hi - lo;
    Ok(RadiusFit {
        rho: (-slope).exp(),
        log_c: intercept,
        max_residual,
        data_range,
        good_fit: max_residual <= 0.1 * data_range,
        modes_used: pts.len(),
    })
}

/// Noise floor below which a tangential mode is considered inactive.
pub const MODE_NOISE_FLOOR: f64 = 1e-13;

/// `<z>^ell`-weighted `L^2` amplitude of each tangential Fourier order
/// `m = 0, 1, ...` (2D; `|k| = 2 pi m / Lx`).
pub fn mode_amplitudes(field: &Field) -> Vec<f64> {
    let grid = field.grid();
    let nz = grid.nz();
    let ell = grid.config.ell;
    let nx = grid.nx();
    let wz: Vec<f64> = grid
        .quad_weights
        .iter()
        .zip(&grid.bracket_sq)
        .map(|(w, b)| w * b.powf(ell))
        .collect();
    let cutoff = Grid::dealias_cutoff(nx).max(0) as usize;
    let mut amps = vec![0.0; cutoff + 1];
    for (kidx, col) in field.data().chunks(nz).enumerate() {
        let (mx, my) = grid.mode_index(kidx);
        if my != 0 {
            continue;
        }
        let m = mx.unsigned_abs() as usize;
        if m > cutoff {
            continue;
        }
        let c: f64 = col.iter().zip(&wz).map(|(v, w)| w * v.norm_sqr()).sum();
        amps[m] += c * grid.tangential_area();
    }
    amps.into_iter().map(f64::sqrt).collect()
}

/// Radius fit on the tangential spectrum of `field`, over the orders
/// `m >= offset` whose amplitude exceeds the noise floor relative to the
/// largest amplitude.
pub fn estimate_radius(field: &Field, sigma: f64, offset: u32) -> Result<RadiusFit> {
    let amps = mode_amplitudes(field);
    let top = amps.iter().cloned().fold(0.0, f64::max);
    let (ms, a): (Vec<u32>, Vec<f64>) = amps
        .iter()
        .enumerate()
        .filter(|(m, a)| *m as u32 >= offset && **a > MODE_NOISE_FLOOR * top && **a > 0.0)
        .map(|(m, a)| (m as u32, *a))
        .unzip();
    fit_radius(&ms, &a, sigma, offset)
}
