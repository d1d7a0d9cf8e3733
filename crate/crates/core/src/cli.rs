//! Batch entry points: `run`, `diagnose`, `norms`, `mms`.
//!
//! Run directory layout:
//!
//! ```text
//! manifest.txt                  config echo + hash of every file below
//! checkpoints/ckpt_NNNNNN.bin   state + auxiliary state per checkpoint
//! norms.csv                     time,log_value,dominant
//! norms/norm_NNNNNN.csv         full composite-norm table per checkpoint
//! diagnostics/<name>.csv        selected residual series
//! summary.csv                   one verdict row per diagnostic
//! ```

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::{info, warn};

use crate::auxiliary::{run_coupled, AuxState, AuxTrajectory};
use crate::checkpoint;
use crate::config::{parse_config_bytes, DiagnosticKind, RunConfig};
use crate::diagnostics::{
    apriori_monitor, energy_balance_report, h_equation_residual, psi_report, u_equation_report,
    xi_eta_equation_residual, DiagnosticReport,
};
use crate::error::{Error, Result};
use crate::gevrey::{composite_norm_a, GevreyParams};
use crate::grid::Grid;
use crate::output::{diagnostic_csv, fmt_f64, norm_report_csv, summary_csv, Manifest, OutputDir};
use crate::solver::mms::{manufactured_forcing_residual, DecayingModes, MmsConfig};
use crate::solver::Trajectory;
use crate::state::State;

pub const FAILURE_RECORD: &str = "failure.json";

#[derive(Parser, Debug)]
#[command(name = "mhdl", version, about = "MHD boundary-layer laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate a configuration and write checkpoints, norms, diagnostics.
    Run { config: PathBuf },
    /// Recompute diagnostics from a run directory.
    Diagnose {
        dir: PathBuf,
        /// `all`, `none`, or a comma-separated list.
        #[arg(long, default_value = "all")]
        select: String,
        /// Defaults to `<dir>/diagnose`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute composite Gevrey norms with other parameters.
    Norms {
        dir: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        imax: Option<u32>,
        /// Defaults to `<dir>/norms_rho<R>_sigma<S>_imax<I>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution convergence ladder.
    Mms {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn ckpt_name(idx: usize) -> String {
    format!("checkpoints/ckpt_{idx:06}.bin")
}

/// Runs the selected diagnostics; two-dimensional-only ones are skipped
/// (with a warning) in 3D.
pub fn run_diagnostics(
    traj: &Trajectory,
    aux: &AuxTrajectory,
    cfg: &RunConfig,
    selection: &[DiagnosticKind],
) -> Result<Vec<DiagnosticReport>> {
    let two_d = traj.grid().dim() == 2;
    let mut out = Vec::new();
    for kind in selection {
        match kind {
            DiagnosticKind::XiEta | DiagnosticKind::HEquation | DiagnosticKind::Psi if !two_d => {
                warn!("diagnostic {} is two-dimensional; skipped", kind.name());
            }
            DiagnosticKind::XiEta => {
                let (eta, xi) = xi_eta_equation_residual(traj)?;
                out.push(eta);
                out.push(xi);
            }
            DiagnosticKind::HEquation => out.push(h_equation_residual(traj)?),
            DiagnosticKind::Energy => out.push(energy_balance_report(traj)?),
            DiagnosticKind::UEquation => out.push(u_equation_report(traj, aux)?),
            DiagnosticKind::Psi => {
                for m in 1..=3 {
                    out.push(psi_report(traj, aux, m)?);
                }
            }
            DiagnosticKind::Apriori => out.push(apriori_monitor(
                traj,
                aux,
                cfg.gevrey.rho,
                cfg.gevrey.sigma,
                cfg.beta,
                &cfg.gevrey,
            )?),
        }
    }
    Ok(out)
}

fn write_diagnostics(out: &mut OutputDir, reports: &[DiagnosticReport], prefix: &str) -> Result<()> {
    for r in reports {
        out.write(&format!("{prefix}{}.csv", r.name), diagnostic_csv(r).as_bytes())?;
    }
    out.write("summary.csv", summary_csv(reports).as_bytes())
}

fn write_norms(
    out: &mut OutputDir,
    traj: &Trajectory,
    aux: &AuxTrajectory,
    params: &GevreyParams,
) -> Result<()> {
    let mut series = String::from("time,log_value,dominant\n");
    for (idx, s) in traj.checkpoints.iter().enumerate() {
        let r = composite_norm_a(traj, aux, params, idx)?;
        out.write(&format!("norms/norm_{idx:06}.csv"), norm_report_csv(&r).as_bytes())?;
        let _ = writeln!(
            series,
            "{},{},{}",
            fmt_f64(s.t),
            fmt_f64(r.log_value),
            r.dominant().unwrap_or("none")
        );
    }
    out.write("norms.csv", series.as_bytes())
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub reports: Vec<DiagnosticReport>,
    pub truncated: bool,
}

/// Integrates `cfg` and writes the run directory. On failure a failure
/// record is written into the output directory before returning the error.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    let out = OutputDir::create(&cfg.output_dir, cfg.to_ini())?;
    let root = out.root.clone();
    run_into(cfg, out).inspect_err(|e| write_failure_record(&root, e))
}

fn run_into(cfg: &RunConfig, mut out: OutputDir) -> Result<RunOutcome> {
    let grid = Grid::new(cfg.domain.clone())?;
    let initial = cfg.initial.build(&grid)?;
    info!(
        "run: {} steps of dt = {} on {}x{}x{}",
        cfg.solver.n_steps(),
        cfg.solver.dt,
        grid.nx(),
        grid.ny(),
        grid.nz()
    );
    let (traj, aux) = run_coupled(&initial, &cfg.solver, None)?;
    for (idx, (s, a)) in traj.checkpoints.iter().zip(&aux.checkpoints).enumerate() {
        out.write(&ckpt_name(idx), &checkpoint::encode(s, Some(a))?)?;
    }
    write_norms(&mut out, &traj, &aux, &cfg.gevrey)?;
    let reports = run_diagnostics(&traj, &aux, cfg, &cfg.diagnostics)?;
    write_diagnostics(&mut out, &reports, "diagnostics/")?;
    Ok(RunOutcome {
        manifest: out.finish()?,
        reports,
        truncated: traj.truncated,
    })
}

/// A run directory read back and verified against its manifest.
pub struct LoadedRun {
    pub config: RunConfig,
    pub traj: Trajectory,
    pub aux: AuxTrajectory,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest = Manifest::read(dir)?;
    let config = parse_config_bytes(manifest.config.as_bytes())?;
    let mut names: Vec<&str> = manifest
        .files
        .iter()
        .map(|f| f.path.as_str())
        .filter(|p| p.starts_with("checkpoints/"))
        .collect();
    names.sort_unstable();
    if names.is_empty() {
        return Err(Error::TooFewCheckpoints { need: 1, have: 0 });
    }
    let mut grid: Option<Arc<Grid>> = None;
    let mut states: Vec<State> = Vec::with_capacity(names.len());
    let mut auxes: Vec<AuxState> = Vec::with_capacity(names.len());
    for name in names {
        let bytes = manifest.read_verified(dir, name)?;
        let c = checkpoint::decode_with_grid(&bytes, grid.as_ref())?;
        grid.get_or_insert_with(|| Arc::clone(c.state.grid()));
        if c.state.grid().config != config.domain {
            return Err(Error::Format(format!(
                "{}: domain differs from the manifest configuration",
                dir.join(name).display()
            )));
        }
        let aux = c.aux.ok_or_else(|| {
            Error::Format(format!("{}: no auxiliary fields", dir.join(name).display()))
        })?;
        states.push(c.state);
        auxes.push(aux);
    }
    Ok(LoadedRun {
        traj: Trajectory {
            domain: config.domain.clone(),
            solver: config.solver.clone(),
            checkpoints: states,
            truncated: false,
        },
        aux: AuxTrajectory { checkpoints: auxes },
        config,
    })
}

/// Recomputes `selection` from `dir` and writes the CSVs and summary.
pub fn cmd_diagnose(
    dir: &Path,
    selection: &[DiagnosticKind],
    out_dir: Option<&Path>,
) -> Result<Vec<DiagnosticReport>> {
    let out_dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| dir.join("diagnose"));
    let loaded = load_run(dir)?;
    let mut out = OutputDir::create(&out_dir, loaded.config.to_ini())?;
    let reports = run_diagnostics(&loaded.traj, &loaded.aux, &loaded.config, selection)?;
    write_diagnostics(&mut out, &reports, "")?;
    out.finish()?;
    Ok(reports)
}

pub fn cmd_norms(
    dir: &Path,
    rho: f64,
    sigma: f64,
    i_max: Option<u32>,
    out_dir: Option<&Path>,
) -> Result<Manifest> {
    let loaded = load_run(dir)?;
    let params = GevreyParams {
        rho,
        sigma,
        i_max: i_max.unwrap_or(loaded.config.gevrey.i_max),
        ..loaded.config.gevrey.clone()
    };
    params.validate()?;
    let out_dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| {
        dir.join(format!("norms_rho{rho}_sigma{sigma}_imax{}", params.i_max))
    });
    let mut out = OutputDir::create(&out_dir, loaded.config.to_ini())?;
    write_norms(&mut out, &loaded.traj, &loaded.aux, &params)?;
    out.finish()
}

pub fn cmd_mms(out_dir: Option<&Path>) -> Result<bool> {
    let table = manufactured_forcing_residual(&DecayingModes, &MmsConfig::default())?;
    let mut csv = String::from("ladder,nx,nz,dt,error\n");
    for (name, rungs) in [("normal", &table.spatial), ("time", &table.temporal)] {
        for r in rungs {
            let _ = writeln!(csv, "{name},{},{},{},{}", r.nx, r.nz, fmt_f64(r.dt), fmt_f64(r.error));
        }
    }
    print!("{csv}");
    let ok = table.min_spatial_order() >= 1.9 && table.min_temporal_order() >= 0.9;
    println!(
        "normal orders {:?}\ntime orders {:?}\n{}",
        table.spatial_orders,
        table.temporal_orders,
        if ok { "PASS" } else { "FAIL" }
    );
    if let Some(dir) = out_dir {
        let mut out = OutputDir::create(dir, String::new())?;
        out.write("mms.csv", csv.as_bytes())?;
        out.finish()?;
    }
    Ok(ok)
}

/// Machine-readable description of `e`.
pub fn failure_record(e: &Error) -> serde_json::Value {
    let mut v = serde_json::json!({
        "status": "error",
        "kind": e.kind(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    let extra = match e {
        Error::Cfl {
            constraint,
            ratio,
            limit,
        } => serde_json::json!({ "constraint": constraint, "ratio": ratio, "limit": limit }),
        Error::NonFinite { last_valid_time } => {
            serde_json::json!({ "last_valid_time": last_valid_time })
        }
        Error::HashMismatch {
            path,
            expected,
            actual,
        } => serde_json::json!({
            "path": path.display().to_string(),
            "expected": expected,
            "actual": actual,
        }),
        Error::Parse { line, .. } | Error::UnknownKey { line, .. } => {
            serde_json::json!({ "line": line })
        }
        Error::Range { key, value, allowed } => {
            serde_json::json!({ "key": key, "value": value, "allowed": allowed })
        }
        Error::Io { path, .. } => serde_json::json!({ "path": path.display().to_string() }),
        _ => serde_json::json!({}),
    };
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

fn write_failure_record(dir: &Path, e: &Error) {
    let path = dir.join(FAILURE_RECORD);
    let text = format!("{}\n", failure_record(e));
    if let Err(io) = std::fs::write(&path, text) {
        warn!("could not write {}: {io}", path.display());
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("MHDL_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| Error::Range {
        key: "MHDL_THREADS".into(),
        value: v.clone(),
        allowed: "a positive integer".into(),
    })?;
    // fails only if a pool already exists, e.g. a second call in-process
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        warn!("thread pool already initialized; MHDL_THREADS ignored");
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_config_bytes(&bytes)
}

fn dispatch(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = read_config(&config)?;
            let outcome = cmd_run(&cfg)?;
            for r in &outcome.reports {
                println!("{} {}", r.name, if r.pass { "pass" } else { "FAIL" });
            }
            if outcome.truncated {
                println!("trajectory truncated at the blow-up threshold");
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Diagnose { dir, select, out } => {
            let selection = DiagnosticKind::parse_list(&select).map_err(|msg| Error::Range {
                key: "--select".into(),
                value: select.clone(),
                allowed: msg,
            })?;
            for r in cmd_diagnose(&dir, &selection, out.as_deref())? {
                println!("{} {}", r.name, if r.pass { "pass" } else { "FAIL" });
            }
        }
        Command::Norms {
            dir,
            rho,
            sigma,
            imax,
            out,
        } => {
            let m = cmd_norms(&dir, rho, sigma, imax, out.as_deref())?;
            println!("wrote {} files", m.files.len());
        }
        Command::Mms { out } => {
            if !cmd_mms(out.as_deref())? {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code. Errors print a JSON failure record on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", failure_record(&e));
            e.exit_code()
        }
    }
}
