//! Executes a [`RunConfig`]: dispatches to the solvers and analysis
//! routines and writes CSV tables, optional snapshots and a JSON manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::sweep::write_table;
use crate::analysis::{
    detection_time_candidates, quadrature_analytic, quadrature_numeric, sweep_beta_max, theta0, wigner_analytic,
    wigner_numeric, QuadratureAxis, QuadratureDistribution, WignerField,
};
use crate::closed::{conditional_states, evolve_closed, SinglePhotonState};
use crate::config::{ConfigError, InitialState, Mode, RunConfig, StateSource};
use crate::error::SolverError;
use crate::fock::FockCutoff;
use crate::model::{beta_of_t, target_states, CatState, MechanicalState, SystemParams};
use crate::open::{evolve_open, reduce_mechanical, PhotonSector, SystemDensityMatrix};
use crate::trajectory::{fmt_f64, write_csv, CsvRow};

/// Scalar results of one run, keyed by name.
pub type Metrics = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run `{label}` aborted: {source}")]
    Solver {
        label: String,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RunError {
    /// 2 for configuration errors, 3 for solver aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver { .. } => 3,
            _ => 1,
        }
    }
}

fn solver_err(label: &str) -> impl Fn(SolverError) -> RunError + '_ {
    move |source| RunError::Solver { label: label.to_string(), source }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub label: String,
    pub dir: PathBuf,
    pub metrics: Metrics,
}

/// Runs `cfg` into `out`. Scans fan out over a pool of `workers` threads,
/// one subdirectory per scan entry, and add `summary.csv`.
pub fn run(cfg: &RunConfig, out: &Path, workers: usize) -> Result<Vec<RunResult>, RunError> {
    fs::create_dir_all(out)?;
    let subs = cfg.expand()?;
    if cfg.scan.is_none() {
        return Ok(vec![run_one(cfg, "", out)?]);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| io::Error::other(e.to_string()))?;
    info!("{} scan entries on {} worker(s)", subs.len(), workers.max(1));
    let results: Vec<Result<RunResult, RunError>> =
        pool.install(|| subs.par_iter().map(|(label, sub)| run_one(sub, label, &out.join(dir_name(label)))).collect());

    let ok: Vec<&RunResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    write_summary(cfg, &ok, &out.join("summary.csv"))?;
    let runs: Vec<Value> = subs
        .iter()
        .zip(&results)
        .map(|((label, _), r)| {
            json!({
                "label": label,
                "dir": dir_name(label),
                "status": if r.is_ok() { "ok" } else { "aborted" },
            })
        })
        .collect();
    let manifest = json!({
        "mode": cfg.mode.name(),
        "config": cfg.entries,
        "config_text": cfg.to_kv(),
        "runs": runs,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    results.into_iter().collect()
}

fn dir_name(label: &str) -> String {
    label.replace(['/', '\\'], "_")
}

fn write_summary(cfg: &RunConfig, runs: &[&RunResult], path: &Path) -> Result<(), RunError> {
    let keys: BTreeSet<&String> = runs.iter().flat_map(|r| r.metrics.keys()).collect();
    let scan = cfg.scan.as_ref().expect("scan present");
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend(scan.keys.iter().cloned());
    header.extend(keys.iter().map(|k| k.to_string()));
    w.write_record(&header)?;
    for r in runs {
        let mut row = vec![r.label.clone()];
        row.extend(scan.keys.iter().map(|k| scan_value(r, k)));
        row.extend(keys.iter().map(|k| r.metrics.get(*k).map(|v| fmt_f64(*v)).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn scan_value(r: &RunResult, key: &str) -> String {
    r.label
        .split(',')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v.to_string())
        .unwrap_or_default()
}

struct Outcome {
    metrics: Metrics,
    invariants: Value,
    files: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { metrics: Metrics::new(), invariants: Value::Null, files: Vec::new() }
    }

    fn set(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }

    fn create(&mut self, dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(dir.join(name))?))
    }
}

/// A single (non-scan) run into `dir`, always leaving a manifest; a solver
/// abort also leaves `diagnostic.json`.
fn run_one(cfg: &RunConfig, label: &str, dir: &Path) -> Result<RunResult, RunError> {
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let mut outcome = Outcome::new();
    let result = execute(cfg, label, dir, &mut outcome);
    let wall = start.elapsed().as_secs_f64();
    let status = match &result {
        Ok(()) => "ok",
        Err(e) => {
            warn!("{e}");
            let diag = json!({ "label": label, "error": e.to_string(), "detail": format!("{e:?}") });
            fs::write(dir.join("diagnostic.json"), serde_json::to_string_pretty(&diag)?)?;
            "aborted"
        }
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest(cfg, label, status, wall, &outcome))?)?;
    result?;
    info!("run `{label}` finished in {wall:.2} s");
    Ok(RunResult { label: label.to_string(), dir: dir.to_path_buf(), metrics: outcome.metrics })
}

fn manifest(cfg: &RunConfig, label: &str, status: &str, wall: f64, o: &Outcome) -> Value {
    let d = cfg.params.derive();
    json!({
        "label": label,
        "mode": cfg.mode.name(),
        "status": status,
        "preset": cfg.preset.map(|p| p.name()),
        "config": cfg.entries,
        "config_text": cfg.to_kv(),
        "g0_scale": cfg.g0_scale,
        "params": cfg.params,
        "derived": {
            "g": d.g,
            "delta": d.delta,
            "beta_max": d.beta_max,
            "t0": d.t0(),
        },
        "rwa": cfg.params.rwa_regime(),
        "n_max": cfg.cutoff.n_max(),
        "solver": {
            "dt_requested": cfg.solver.dt,
            "dt": cfg.solver.effective_dt(),
            "steps": cfg.solver.steps(),
            "t_end": cfg.solver.t_end,
            "record_stride": cfg.solver.record_stride,
        },
        "t_d": cfg.t_d,
        "wall_time_s": wall,
        "invariants": o.invariants,
        "metrics": o.metrics,
        "files": o.files,
    })
}

/// Mechanical state conditioned on the photon sector.
enum Conditional {
    Cat(CatState),
    Rho(Array2<C64>),
}

impl Conditional {
    fn from_branch(state: MechanicalState) -> Self {
        match state {
            MechanicalState::Cat(c) => Self::Cat(c),
            other => Self::Rho(other.density_matrix(None)),
        }
    }

    fn wigner(&self, cfg: &RunConfig) -> WignerField {
        match self {
            Self::Cat(c) => wigner_analytic(c, &cfg.grid),
            Self::Rho(r) => wigner_numeric(r, &cfg.grid),
        }
    }

    fn quadrature(&self, axis: &QuadratureAxis) -> QuadratureDistribution {
        match self {
            Self::Cat(c) => quadrature_analytic(c, axis),
            Self::Rho(r) => quadrature_numeric(r, axis),
        }
    }
}

fn execute(cfg: &RunConfig, label: &str, dir: &Path, o: &mut Outcome) -> Result<(), RunError> {
    match cfg.mode {
        Mode::Sweep => sweep(cfg, dir, o),
        Mode::DetectTimes => detect(cfg, dir, o),
        Mode::Closed => {
            let cond = run_closed(cfg, label, dir, o)?;
            if cfg.tomography {
                let (l, r) = cond.map_err(solver_err(label))?;
                write_wigner(cfg, dir, &l, &r, o)?;
                write_quadrature(cfg, dir, &l, &r, o)?;
            }
            Ok(())
        }
        Mode::Open => {
            let cond = run_open(cfg, label, dir, o)?;
            if cfg.tomography {
                let (l, r) = cond.map_err(solver_err(label))?;
                write_wigner(cfg, dir, &l, &r, o)?;
                write_quadrature(cfg, dir, &l, &r, o)?;
            }
            Ok(())
        }
        Mode::Wigner | Mode::Quadrature => {
            let (l, r) = match cfg.state_source {
                StateSource::Analytic => {
                    let d = cfg.params.derive();
                    let (l, r) = target_states(&cfg.params, &d, cfg.solver.t_end);
                    (Conditional::Cat(l), Conditional::Cat(r))
                }
                StateSource::Closed => run_closed(cfg, label, dir, o)?.map_err(solver_err(label))?,
                StateSource::Open => run_open(cfg, label, dir, o)?.map_err(solver_err(label))?,
            };
            if cfg.mode == Mode::Wigner {
                write_wigner(cfg, dir, &l, &r, o)
            } else {
                write_quadrature(cfg, dir, &l, &r, o)
            }
        }
    }
}

type Branches = Result<(Conditional, Conditional), SolverError>;

fn closed_initial(cfg: &RunConfig) -> Result<SinglePhotonState, RunError> {
    Ok(match &cfg.initial {
        InitialState::Left => SinglePhotonState::left(cfg.cutoff),
        InitialState::Right => SinglePhotonState::right(cfg.cutoff),
        InitialState::Bell => SinglePhotonState::bell(cfg.cutoff),
        InitialState::File(p) => {
            return Err(ConfigError::Invalid {
                key: "initial".into(),
                value: p.display().to_string(),
                reason: "snapshot initial states need an open run".into(),
            }
            .into())
        }
    })
}

fn open_initial(cfg: &RunConfig) -> Result<SystemDensityMatrix, RunError> {
    match &cfg.initial {
        InitialState::File(path) => {
            let rho = SystemDensityMatrix::read_binary(io::BufReader::new(File::open(path)?))?;
            let invalid = |reason: String| ConfigError::Invalid {
                key: "initial".into(),
                value: path.display().to_string(),
                reason,
            };
            let dim = rho.nrows();
            if dim % 3 != 0 || dim < 6 {
                return Err(invalid(format!("snapshot dimension {dim} is not 3 (n_max + 1)")).into());
            }
            let cutoff = FockCutoff::new(dim / 3 - 1).map_err(|e| invalid(e.to_string()))?;
            if cutoff != cfg.cutoff {
                warn!("snapshot n_max = {} overrides configured n_max = {}", cutoff.n_max(), cfg.cutoff.n_max());
            }
            Ok(SystemDensityMatrix::new(rho, cutoff, 0.0).map_err(|e| invalid(e.to_string()))?)
        }
        _ => Ok(SystemDensityMatrix::from_single_photon(&closed_initial(cfg)?)),
    }
}

#[derive(Serialize)]
struct ComparisonRow {
    t: f64,
    n_l: f64,
    n_r: f64,
    x: f64,
    x_single: f64,
}

impl CsvRow for ComparisonRow {
    fn header() -> &'static [&'static str] {
        &["t", "nL", "nR", "x_over_x0", "x_over_x0_single_mode"]
    }

    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.t), fmt_f64(self.n_l), fmt_f64(self.n_r), fmt_f64(self.x), fmt_f64(self.x_single)]
    }
}

fn run_closed(cfg: &RunConfig, label: &str, dir: &Path, o: &mut Outcome) -> Result<Branches, RunError> {
    let initial = closed_initial(cfg)?;
    let run = evolve_closed(&initial, &cfg.params, &cfg.solver).map_err(solver_err(label))?;
    write_csv(o.create(dir, "trajectory.csv")?, &run.records)?;
    o.invariants = serde_json::to_value(run.summary)?;
    let last = run.records.last().expect("initial record");
    for (k, v) in [
        ("t", Some(last.t)),
        ("nL", Some(last.n_l)),
        ("nR", Some(last.n_r)),
        ("nb", Some(last.nb)),
        ("x_over_x0", Some(last.x_over_x0)),
        ("F", last.f),
        ("F_L", last.f_l),
        ("F_R", last.f_r),
        ("max_norm_drift", Some(run.summary.max_norm_drift)),
        ("max_tail", Some(run.summary.max_tail)),
    ] {
        if let Some(v) = v {
            o.set(k, v);
        }
    }
    if let Some(f) = run.records.iter().filter_map(|r| r.f).reduce(f64::max) {
        o.set("F_max", f);
    }

    if cfg.compare_single_mode {
        let single = SystemParams { xi: 0.0, ..cfg.params };
        let base = evolve_closed(&initial, &single, &cfg.solver).map_err(solver_err(label))?;
        let rows: Vec<ComparisonRow> = run
            .records
            .iter()
            .zip(&base.records)
            .map(|(a, b)| ComparisonRow { t: a.t, n_l: a.n_l, n_r: a.n_r, x: a.x_over_x0, x_single: b.x_over_x0 })
            .collect();
        write_csv(o.create(dir, "comparison.csv")?, &rows)?;
        if cfg.initial == InitialState::Right {
            let p = &cfg.params;
            let err = base
                .records
                .iter()
                .map(|r| (r.x_over_x0 - 4.0 * p.g0 / p.omega_m * (0.5 * p.omega_m * r.t).sin().powi(2)).abs())
                .fold(0.0, f64::max);
            o.set("single_mode_closed_form_error", err);
        }
    }

    if cfg.dump_snapshot {
        dump_snapshot(&SystemDensityMatrix::from_single_photon(&run.final_state), dir, o)?;
    }
    Ok(conditional_states(&run.final_state)
        .map(|(l, r)| (Conditional::from_branch(l.state), Conditional::from_branch(r.state)))
        .map_err(SolverError::from))
}

fn run_open(cfg: &RunConfig, label: &str, dir: &Path, o: &mut Outcome) -> Result<Branches, RunError> {
    let initial = open_initial(cfg)?;
    let run = evolve_open(&initial, &cfg.params, &cfg.solver).map_err(solver_err(label))?;
    write_csv(o.create(dir, "trajectory.csv")?, &run.records)?;
    o.invariants = serde_json::to_value(run.summary)?;
    let last = run.records.last().expect("initial record");
    for (k, v) in [
        ("t", Some(last.t)),
        ("P_L", Some(last.p_l)),
        ("P_R", Some(last.p_r)),
        ("P_V", Some(last.p_v)),
        ("nb", Some(last.nb)),
        ("F_L", last.f_l),
        ("F_R", last.f_r),
        ("max_trace_drift", Some(run.summary.max_trace_drift)),
        ("min_eigenvalue", Some(run.summary.min_eigenvalue)),
    ] {
        if let Some(v) = v {
            o.set(k, v);
        }
    }
    if cfg.dump_snapshot {
        dump_snapshot(&run.final_state, dir, o)?;
    }
    let branch = |s| reduce_mechanical(&run.final_state, s).map(|b| Conditional::from_branch(b.state));
    Ok(branch(PhotonSector::L).and_then(|l| Ok((l, branch(PhotonSector::R)?))).map_err(SolverError::from))
}

fn dump_snapshot(rho: &SystemDensityMatrix, dir: &Path, o: &mut Outcome) -> Result<(), RunError> {
    serde_json::to_writer(o.create(dir, "final_rho.json")?, &rho.to_json())?;
    rho.write_binary(o.create(dir, "final_rho.bin")?)?;
    Ok(())
}

fn beta_at_end(cfg: &RunConfig) -> C64 {
    beta_of_t(&cfg.params.derive(), cfg.params.omega_m, cfg.solver.t_end)
}

fn write_wigner(
    cfg: &RunConfig,
    dir: &Path,
    l: &Conditional,
    r: &Conditional,
    o: &mut Outcome,
) -> Result<(), RunError> {
    for (name, state) in [("L", l), ("R", r)] {
        let w = state.wigner(cfg);
        w.write_csv(o.create(dir, &format!("wigner_{name}.csv"))?)?;
        o.set(&format!("wigner_{name}_integral"), w.integral());
        o.set(&format!("wigner_{name}_min"), w.min());
        for (k, p) in w.peaks(2, 1.0).into_iter().enumerate() {
            o.set(&format!("wigner_{name}_peak{k}_re"), p.re);
            o.set(&format!("wigner_{name}_peak{k}_im"), p.im);
        }
    }
    let beta = beta_at_end(cfg);
    o.set("beta_re", beta.re);
    o.set("beta_im", beta.im);
    Ok(())
}

fn write_quadrature(
    cfg: &RunConfig,
    dir: &Path,
    l: &Conditional,
    r: &Conditional,
    o: &mut Outcome,
) -> Result<(), RunError> {
    let theta = cfg.theta.unwrap_or_else(|| theta0(beta_at_end(cfg)));
    let axis = QuadratureAxis::uniform(theta, cfg.x_min, cfg.x_max, cfg.n_x).map_err(|e| ConfigError::Invalid {
        key: "x_min".into(),
        value: cfg.x_min.to_string(),
        reason: e.to_string(),
    })?;
    o.set("theta", theta);
    let (pl, pr) = (l.quadrature(&axis), r.quadrature(&axis));
    for (name, p) in [("L", &pl), ("R", &pr)] {
        p.write_csv(o.create(dir, &format!("quadrature_{name}.csv"))?)?;
        o.set(&format!("visibility_{name}"), crate::analysis::fringe_visibility(p, 1.0));
        o.set(&format!("quadrature_{name}_integral"), p.integral());
    }
    if (cfg.x_min + cfg.x_max).abs() < 1e-12 {
        // the axis is symmetric, so index k maps to -x at n - 1 - k
        let n = pl.p.len();
        let asym = (0..n).map(|k| (pl.p[k] - pr.p[n - 1 - k]).abs()).fold(0.0, f64::max);
        o.set("mirror_asymmetry", asym);
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, dir: &Path, o: &mut Outcome) -> Result<(), RunError> {
    let h = (cfg.delta_max - cfg.delta_min) / (cfg.n_delta - 1) as f64;
    let grid: Vec<f64> = (0..cfg.n_delta).map(|k| cfg.delta_min + k as f64 * h).collect();
    let rows = sweep_beta_max(&cfg.xi_list, &grid, cfg.params.n0, cfg.params.g0);
    write_table(o.create(dir, "sweep.csv")?, &rows)?;
    o.set("rows", rows.len() as f64);
    Ok(())
}

fn detect(cfg: &RunConfig, dir: &Path, o: &mut Outcome) -> Result<(), RunError> {
    let d = cfg.params.derive();
    let center = match (cfg.window_center, d.t0()) {
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(ConfigError::Missing(vec!["window_center".into()]).into()),
    };
    let half = cfg.window_half_width.unwrap_or(2.0 * PI / cfg.params.omega_0);
    let times = detection_time_candidates(&cfg.params, &d, center, half);
    write_table(o.create(dir, "detection_times.csv")?, &times)?;
    o.set("candidates", times.len() as f64);
    if let Some(td) = cfg.t_d {
        if let Some(best) = times.iter().map(|c| (c.t - td).abs()).reduce(f64::min) {
            o.set("t_d_distance", best);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn cfg(preset: Preset, set: &[(&str, &str)]) -> RunConfig {
        let set: Vec<(String, String)> = set.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        RunConfig::resolve("", Some(preset), &set).unwrap()
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(ConfigError::Missing(vec![])).exit_code(), 2);
        let e = RunError::Solver { label: String::new(), source: SolverError::Config("x".into()) };
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn sweep_preset_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let res = run(&cfg(Preset::Fig1a, &[]), dir.path(), 1).unwrap();
        assert_eq!(res[0].metrics["rows"], 182.0);
        let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert!(text.starts_with("xi,delta,g,beta_max\n"));
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["status"], "ok");
    }

    #[test]
    fn snapshot_initial_state_requires_open() {
        let c = cfg(Preset::FigS1, &[("initial", "file:/nonexistent")]);
        let dir = tempfile::tempdir().unwrap();
        let err = run(&c, dir.path(), 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn solver_abort_leaves_diagnostic() {
        // a two-level ladder cannot hold the displaced state
        let c = cfg(Preset::FigS1, &[("n_max", "2"), ("compare_single_mode", "false")]);
        let dir = tempfile::tempdir().unwrap();
        let err = run(&c, dir.path(), 1).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(dir.path().join("diagnostic.json").exists());
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["status"], "aborted");
    }
}
