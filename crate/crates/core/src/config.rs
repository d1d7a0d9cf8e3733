//! INI-style run configuration.
//!
//! ```text
//! [domain]   dim lx ly zmax nx ny nz stretch ell nu mu eps
//! [solver]   dt t_final cfl_safety imex checkpoint_every model
//! [gevrey]   rho sigma n_max i_max weighted_uf m_max beta
//! [initial]  family mode amplitude magnetic_amplitude profile seed
//! [output]   dir diagnostics
//! ```
//!
//! `domain.nx`, `domain.nz`, `solver.dt`, `solver.t_final` and `output.dir`
//! are required; everything else has a default that is logged when used.
//! Comments start with `#` or `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use log::info;

use crate::error::{Error, Result};
use crate::gevrey::GevreyParams;
use crate::grid::DomainConfig;
use crate::initial::{Family, InitialRecipe, Profile};
use crate::solver::{Model, SolverConfig};

/// Offline diagnostics a run (or `diagnose`) can produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticKind {
    XiEta,
    HEquation,
    Energy,
    UEquation,
    Psi,
    Apriori,
}

impl DiagnosticKind {
    pub const ALL: [DiagnosticKind; 6] = [
        DiagnosticKind::XiEta,
        DiagnosticKind::HEquation,
        DiagnosticKind::Energy,
        DiagnosticKind::UEquation,
        DiagnosticKind::Psi,
        DiagnosticKind::Apriori,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiagnosticKind::XiEta => "xi_eta",
            DiagnosticKind::HEquation => "h_equation",
            DiagnosticKind::Energy => "energy",
            DiagnosticKind::UEquation => "u_equation",
            DiagnosticKind::Psi => "psi",
            DiagnosticKind::Apriori => "apriori",
        }
    }

    pub fn from_name(s: &str) -> Option<DiagnosticKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Parses `all`, `none`, or a comma-separated list of names.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<DiagnosticKind>, String> {
        let s = s.trim();
        match s {
            "all" => return Ok(Self::ALL.to_vec()),
            "none" | "" => return Ok(Vec::new()),
            _ => {}
        }
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim) {
            let k = DiagnosticKind::from_name(item).ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown diagnostic `{item}` (known: all, none, {})", names.join(", "))
            })?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn list_name(list: &[DiagnosticKind]) -> String {
        if list.is_empty() {
            "none".into()
        } else {
            list.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub solver: SolverConfig,
    pub gevrey: GevreyParams,
    /// Radius decay rate of the a priori monitor (`rho(t) = rho - beta t`).
    pub beta: f64,
    pub initial: InitialRecipe,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub diagnostics: Vec<DiagnosticKind>,
    /// `(section.key, value)` for every key that took its default.
    pub defaults: Vec<(String, String)>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "domain",
        &["dim", "lx", "ly", "zmax", "nx", "ny", "nz", "stretch", "ell", "nu", "mu", "eps"],
    ),
    (
        "solver",
        &["dt", "t_final", "cfl_safety", "imex", "checkpoint_every", "model"],
    ),
    (
        "gevrey",
        &["rho", "sigma", "n_max", "i_max", "weighted_uf", "m_max", "beta"],
    ),
    (
        "initial",
        &["family", "mode", "amplitude", "magnetic_amplitude", "profile", "seed"],
    ),
    ("output", &["dir", "diagnostics"]),
];

const REQUIRED: &[&str] = &[
    "domain.nx",
    "domain.nz",
    "solver.dt",
    "solver.t_final",
    "output.dir",
];

struct Entry {
    line: usize,
    value: String,
}

/// Key-value table of the file, keyed by `section.key`.
struct Table {
    entries: BTreeMap<String, Entry>,
    defaults: Vec<(String, String)>,
}

impl Table {
    fn parse(text: &str) -> Result<Table> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("unterminated section header `{content}`"),
                })?;
                let name = name.trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|(s, _)| *s == name)
                        .map(|(s, _)| *s)
                        .ok_or_else(|| Error::Parse {
                            line,
                            msg: format!(
                                "unknown section [{name}] (known: domain, solver, gevrey, initial, output)"
                            ),
                        })?,
                );
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| Error::Parse {
                line,
                msg: format!("key `{key}` outside any section"),
            })?;
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty key".into(),
                });
            }
            let known = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(Error::UnknownKey {
                    line,
                    section: sec.into(),
                    key: key.into(),
                });
            }
            if value.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: format!("empty value for `{key}`"),
                });
            }
            let full = format!("{sec}.{key}");
            if let Some(prev) = entries.get(&full) {
                return Err(Error::DuplicateKey {
                    key: full,
                    first: prev.line,
                    second: line,
                });
            }
            entries.insert(
                full,
                Entry {
                    line,
                    value: value.into(),
                },
            );
        }
        for r in REQUIRED {
            if !entries.contains_key(*r) {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("missing required key `{r}`"),
                });
            }
        }
        Ok(Table {
            entries,
            defaults: Vec::new(),
        })
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T, what: &str) -> Result<T> {
        match self.entries.get(key) {
            Some(e) => e.value.parse().map_err(|_| Error::Parse {
                line: e.line,
                msg: format!("`{key}` expects {what}, found `{}`", e.value),
            }),
            None => {
                self.defaults.push((key.into(), String::new()));
                Ok(default)
            }
        }
    }

    fn get_with<T>(
        &mut self,
        key: &str,
        default: T,
        what: &str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T> {
        match self.entries.get(key) {
            Some(e) => parse(&e.value).ok_or_else(|| Error::Parse {
                line: e.line,
                msg: format!("`{key}` expects {what}, found `{}`", e.value),
            }),
            None => {
                self.defaults.push((key.into(), String::new()));
                Ok(default)
            }
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut t = Table::parse(text)?;
    let dd = DomainConfig::default();
    let dim: usize = t.get("domain.dim", dd.dim, "an integer")?;
    let domain = DomainConfig {
        dim,
        lx: t.get("domain.lx", dd.lx, "a number")?,
        ly: t.get("domain.ly", dd.ly, "a number")?,
        zmax: t.get("domain.zmax", dd.zmax, "a number")?,
        nx: t.get("domain.nx", dd.nx, "an integer")?,
        ny: t.get("domain.ny", if dim == 3 { dd.nx } else { 1 }, "an integer")?,
        nz: t.get("domain.nz", dd.nz, "an integer")?,
        stretch: t.get("domain.stretch", dd.stretch, "a number")?,
        ell: t.get("domain.ell", dd.ell, "a number")?,
        nu: t.get("domain.nu", dd.nu, "a number")?,
        mu: t.get("domain.mu", dd.mu, "a number")?,
        eps: t.get("domain.eps", dd.eps, "a number")?,
    };
    let ds = SolverConfig::default();
    let solver = SolverConfig {
        dt: t.get("solver.dt", ds.dt, "a number")?,
        t_final: t.get("solver.t_final", ds.t_final, "a number")?,
        cfl_safety: t.get("solver.cfl_safety", ds.cfl_safety, "a number")?,
        imex: t.get_with("solver.imex", ds.imex, "true or false", parse_bool)?,
        checkpoint_every: t.get("solver.checkpoint_every", ds.checkpoint_every, "an integer")?,
        model: t.get_with("solver.model", ds.model, "mhd, prandtl or diffusion", Model::from_name)?,
    };
    let dg = GevreyParams::default();
    let gevrey = GevreyParams {
        rho: t.get("gevrey.rho", dg.rho, "a number")?,
        sigma: t.get("gevrey.sigma", dg.sigma, "a number")?,
        n_max: t.get("gevrey.n_max", dg.n_max, "an integer")?,
        i_max: t.get("gevrey.i_max", dg.i_max, "an integer")?,
        weighted_uf: t.get_with("gevrey.weighted_uf", dg.weighted_uf, "true or false", parse_bool)?,
        m_max: t.get_with("gevrey.m_max", dg.m_max, "`auto` or an integer", |s| {
            if s == "auto" {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        })?,
        ..dg
    };
    let beta: f64 = t.get("gevrey.beta", 0.2, "a number")?;
    let di = InitialRecipe::default();
    let initial = InitialRecipe {
        family: t.get_with("initial.family", di.family, "zero, single_mode or mixed", Family::from_name)?,
        mode: t.get("initial.mode", di.mode, "an integer")?,
        amplitude: t.get("initial.amplitude", di.amplitude, "a number")?,
        magnetic_amplitude: t.get("initial.magnetic_amplitude", di.magnetic_amplitude, "a number")?,
        profile: t.get_with("initial.profile", di.profile, "exp, gauss or wall", Profile::from_name)?,
    };
    let seed: u64 = t.get("initial.seed", 0, "a non-negative integer")?;
    let output_dir: String = t.get("output.dir", String::new(), "a path")?;
    let diagnostics = t.get_with(
        "output.diagnostics",
        Vec::new(),
        "all, none, or a comma-separated list",
        |s| DiagnosticKind::parse_list(s).ok(),
    )?;

    domain.validate()?;
    solver.validate()?;
    gevrey.validate()?;
    initial.validate(&domain)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Range {
            key: "beta".into(),
            value: beta.to_string(),
            allowed: "beta >= 0".into(),
        });
    }
    if diagnostics.contains(&DiagnosticKind::Apriori) && gevrey.rho - beta * solver.t_final <= 0.0 {
        return Err(Error::Range {
            key: "beta".into(),
            value: beta.to_string(),
            allowed: format!(
                "rho - beta * t_final > 0 (rho = {}, t_final = {})",
                gevrey.rho, solver.t_final
            ),
        });
    }
    let mut cfg = RunConfig {
        domain,
        solver,
        gevrey,
        beta,
        initial,
        seed,
        output_dir: PathBuf::from(output_dir),
        diagnostics,
        defaults: Vec::new(),
    };
    // report defaults in the same spelling a config file would use
    let canonical = cfg.to_ini();
    let mut section = "";
    for line in canonical.lines() {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name;
        } else if let Some((k, v)) = line.split_once(" = ") {
            let full = format!("{section}.{k}");
            if t.defaults.iter().any(|(d, _)| *d == full) {
                info!("default {full} = {v}");
                cfg.defaults.push((full, v.to_string()));
            }
        }
    }
    Ok(cfg)
}

/// Byte-level entry point; rejects non-UTF-8 input.
pub fn parse_config_bytes(bytes: &[u8]) -> Result<RunConfig> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1,
        msg: "file is not valid UTF-8".into(),
    })?;
    parse_config(text)
}

impl RunConfig {
    /// Canonical text form; `parse_config(&c.to_ini())` reproduces `c`
    /// (apart from `defaults`).
    pub fn to_ini(&self) -> String {
        let d = &self.domain;
        let s = &self.solver;
        let g = &self.gevrey;
        let i = &self.initial;
        let mut o = String::new();
        let _ = writeln!(o, "[domain]");
        let _ = writeln!(o, "dim = {}", d.dim);
        let _ = writeln!(o, "lx = {:?}", d.lx);
        let _ = writeln!(o, "ly = {:?}", d.ly);
        let _ = writeln!(o, "zmax = {:?}", d.zmax);
        let _ = writeln!(o, "nx = {}", d.nx);
        let _ = writeln!(o, "ny = {}", d.ny);
        let _ = writeln!(o, "nz = {}", d.nz);
        let _ = writeln!(o, "stretch = {:?}", d.stretch);
        let _ = writeln!(o, "ell = {:?}", d.ell);
        let _ = writeln!(o, "nu = {:?}", d.nu);
        let _ = writeln!(o, "mu = {:?}", d.mu);
        let _ = writeln!(o, "eps = {:?}", d.eps);
        let _ = writeln!(o, "\n[solver]");
        let _ = writeln!(o, "dt = {:?}", s.dt);
        let _ = writeln!(o, "t_final = {:?}", s.t_final);
        let _ = writeln!(o, "cfl_safety = {:?}", s.cfl_safety);
        let _ = writeln!(o, "imex = {}", s.imex);
        let _ = writeln!(o, "checkpoint_every = {}", s.checkpoint_every);
        let _ = writeln!(o, "model = {}", s.model.name());
        let _ = writeln!(o, "\n[gevrey]");
        let _ = writeln!(o, "rho = {:?}", g.rho);
        let _ = writeln!(o, "sigma = {:?}", g.sigma);
        let _ = writeln!(o, "n_max = {}", g.n_max);
        let _ = writeln!(o, "i_max = {}", g.i_max);
        let _ = writeln!(o, "weighted_uf = {}", g.weighted_uf);
        match g.m_max {
            Some(m) => {
                let _ = writeln!(o, "m_max = {m}");
            }
            None => {
                let _ = writeln!(o, "m_max = auto");
            }
        }
        let _ = writeln!(o, "beta = {:?}", self.beta);
        let _ = writeln!(o, "\n[initial]");
        let _ = writeln!(o, "family = {}", i.family);
        let _ = writeln!(o, "mode = {}", i.mode);
        let _ = writeln!(o, "amplitude = {:?}", i.amplitude);
        let _ = writeln!(o, "magnetic_amplitude = {:?}", i.magnetic_amplitude);
        let _ = writeln!(o, "profile = {}", i.profile);
        let _ = writeln!(o, "seed = {}", self.seed);
        let _ = writeln!(o, "\n[output]");
        let _ = writeln!(o, "dir = {}", self.output_dir.display());
        let _ = writeln!(o, "diagnostics = {}", DiagnosticKind::list_name(&self.diagnostics));
        o
    }
}
