//! Named analytic initial data, and the small-data fixture the regression
//! tests and refinement studies share.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{DomainConfig, Grid};
use crate::solver::SolverConfig;
use crate::state::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Zero,
    /// `u = A sin(mx) p_u(z)`, `f = B cos(mx) p_f(z)`.
    SingleMode,
    /// Single mode plus a half-amplitude second harmonic.
    Mixed,
}

/// Normal profiles; `p_u` vanishes at the wall, `p_f` has zero slope there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// `p_u = e^{-z} - e^{-2z}`, `p_f = (1 + z) e^{-z}`.
    Exp,
    /// `p_u = z e^{-z^2}`, `p_f = e^{-z^2}`.
    Gauss,
    /// `p_u = z e^{-z^2}`, `p_f = z^2 e^{-z^2}`: the magnetic field vanishes
    /// at the wall, so `(f dx + h dz) f = 0` there and the data are
    /// compatible with `u = 0` to first order in time.
    Wall,
}

impl Family {
    pub const NAMES: &'static [&'static str] = &["zero", "single_mode", "mixed"];

    pub fn from_name(s: &str) -> Option<Family> {
        match s {
            "zero" => Some(Family::Zero),
            "single_mode" => Some(Family::SingleMode),
            "mixed" => Some(Family::Mixed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::SingleMode => "single_mode",
            Family::Mixed => "mixed",
        }
    }
}

impl Profile {
    pub const NAMES: &'static [&'static str] = &["exp", "gauss", "wall"];

    pub fn from_name(s: &str) -> Option<Profile> {
        match s {
            "exp" => Some(Profile::Exp),
            "gauss" => Some(Profile::Gauss),
            "wall" => Some(Profile::Wall),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Exp => "exp",
            Profile::Gauss => "gauss",
            Profile::Wall => "wall",
        }
    }

    fn velocity(self, z: f64) -> f64 {
        match self {
            Profile::Exp => (-z).exp() - (-2.0 * z).exp(),
            Profile::Gauss | Profile::Wall => z * (-z * z).exp(),
        }
    }

    fn magnetic(self, z: f64) -> f64 {
        match self {
            Profile::Exp => (1.0 + z) * (-z).exp(),
            Profile::Gauss => (-z * z).exp(),
            Profile::Wall => z * z * (-z * z).exp(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialRecipe {
    pub family: Family,
    /// Tangential mode index `m >= 1`.
    pub mode: u32,
    pub amplitude: f64,
    pub magnetic_amplitude: f64,
    pub profile: Profile,
}

impl Default for InitialRecipe {
    fn default() -> Self {
        InitialRecipe {
            family: Family::Mixed,
            mode: 1,
            amplitude: 0.1,
            magnetic_amplitude: 0.5,
            profile: Profile::Wall,
        }
    }
}

/// Amplitudes above this are rejected: the recipes are meant for the
/// small-data regime.
pub const MAX_AMPLITUDE: f64 = 10.0;

impl InitialRecipe {
    pub fn validate(&self, domain: &DomainConfig) -> Result<()> {
        let cutoff = Grid::dealias_cutoff(domain.nx);
        let highest = match self.family {
            Family::Mixed => 2 * self.mode as i64,
            _ => self.mode as i64,
        };
        if self.mode == 0 || highest > cutoff {
            return Err(Error::Range {
                key: "mode".into(),
                value: self.mode.to_string(),
                allowed: format!("1 <= mode with every excited harmonic <= {cutoff} at nx = {}", domain.nx),
            });
        }
        for (key, a) in [
            ("amplitude", self.amplitude),
            ("magnetic_amplitude", self.magnetic_amplitude),
        ] {
            if !(a.is_finite() && a.abs() <= MAX_AMPLITUDE) {
                return Err(Error::Range {
                    key: key.into(),
                    value: a.to_string(),
                    allowed: format!("|{key}| <= {MAX_AMPLITUDE}"),
                });
            }
        }
        Ok(())
    }

    /// Builds the state at `t = 0` with boundary conditions applied.
    pub fn build(&self, grid: &Arc<Grid>) -> Result<State> {
        self.validate(&grid.config)?;
        if self.family == Family::Zero {
            return Ok(State::zeros(grid));
        }
        let kx = 2.0 * PI / grid.config.lx * self.mode as f64;
        let ky = 2.0 * PI / grid.config.ly * self.mode as f64;
        let second = if self.family == Family::Mixed { 0.5 } else { 0.0 };
        let (a, b, p) = (self.amplitude, self.magnetic_amplitude, self.profile);
        let three = grid.dim() == 3;
        let cy = move |y: f64| if three { (ky * y).cos() } else { 1.0 };
        let sy = move |y: f64| if three { (ky * y).sin() } else { 1.0 };

        let u1 = Field::from_fn(grid, |x, y, z| {
            a * ((kx * x).sin() + second * (2.0 * kx * x).cos()) * cy(y) * p.velocity(z)
        });
        let f1 = Field::from_fn(grid, |x, y, z| {
            b * ((kx * x).cos() + second * (2.0 * kx * x).sin()) * cy(y) * p.magnetic(z)
        });
        let (mut u_h, mut f_h) = (vec![u1], vec![f1]);
        if three {
            u_h.push(Field::from_fn(grid, |x, y, z| {
                a * (kx * x).cos() * sy(y) * p.velocity(z)
            }));
            f_h.push(Field::from_fn(grid, |x, y, z| {
                b * (kx * x).sin() * sy(y) * p.magnetic(z)
            }));
        }
        Ok(State::new(0.0, u_h, f_h)?.apply_boundary_conditions())
    }
}

/// Small-data fixture: smooth two-harmonic data (velocity amplitude 0.1,
/// magnetic 0.5, wall-compatible profiles) with `nu != mu`, on a grid that
/// runs in about a second.
pub fn small_data_fixture() -> (DomainConfig, SolverConfig, InitialRecipe) {
    let domain = DomainConfig {
        nx: 32,
        nz: 64,
        zmax: 8.0,
        stretch: 2.0,
        nu: 1.0,
        mu: 0.5,
        ..DomainConfig::default()
    };
    let solver = SolverConfig {
        dt: 2e-3,
        t_final: 0.5,
        checkpoint_every: 10,
        ..SolverConfig::default()
    };
    (domain, solver, InitialRecipe::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_are_compatible() {
        let (domain, _, recipe) = small_data_fixture();
        let g = Grid::new(domain).unwrap();
        for family in [Family::Zero, Family::SingleMode, Family::Mixed] {
            for profile in [Profile::Exp, Profile::Gauss, Profile::Wall] {
                let s = InitialRecipe {
                    family,
                    profile,
                    ..recipe.clone()
                }
                .build(&g)
                .unwrap();
                s.check_compatibility().unwrap();
            }
        }
    }

    #[test]
    fn mode_above_cutoff_rejected() {
        let (domain, _, recipe) = small_data_fixture();
        let e = InitialRecipe { mode: 6, ..recipe }.validate(&domain).unwrap_err();
        assert!(matches!(e, Error::Range { .. }));
    }

    #[test]
    fn names_round_trip() {
        for n in Family::NAMES {
            assert_eq!(Family::from_name(n).unwrap().name(), *n);
        }
        for n in Profile::NAMES {
            assert_eq!(Profile::from_name(n).unwrap().name(), *n);
        }
    }
}
