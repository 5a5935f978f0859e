//! Flat `key = value` run configuration with figure presets.
//!
//! Values are layered: preset, then the document, then command-line
//! overrides. Every override of an already-set key is logged.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use log::info;
use thiserror::Error;

use crate::analysis::PhaseSpaceGrid;
use crate::fock::FockCutoff;
use crate::model::SystemParams;
use crate::solver::SolverConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    DuplicateKey(String),
    #[error("missing required fields: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("invalid value for `{key}` = `{value}`: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("keys {0} are mutually exclusive")]
    Conflict(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// Keys accepted in a configuration document.
pub const KEYS: &[&str] = &[
    "mode",
    "preset",
    "units",
    "omega_c",
    "omega_m",
    "g0",
    "xi",
    "n0",
    "omega_0",
    "delta",
    "delta_over_g",
    "gamma_c",
    "gamma_m",
    "n_th",
    "n_max",
    "dt",
    "t_end",
    "record_stride",
    "initial",
    "t_d",
    "theta",
    "state_source",
    "grid_re_min",
    "grid_re_max",
    "grid_im_min",
    "grid_im_max",
    "grid_n_re",
    "grid_n_im",
    "x_min",
    "x_max",
    "n_x",
    "xi_list",
    "delta_min",
    "delta_max",
    "n_delta",
    "window_center",
    "window_half_width",
    "scan_key",
    "scan_values",
    "compare_single_mode",
    "tomography",
    "dump_snapshot",
    "output_dir",
];

const TUNING_KEYS: [&str; 3] = ["omega_0", "delta", "delta_over_g"];

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Closed,
    Open,
    Wigner,
    Quadrature,
    Sweep,
    DetectTimes,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Self::Closed, Self::Open, Self::Wigner, Self::Quadrature, Self::Sweep, Self::DetectTimes];

    pub fn name(self) -> &'static str {
        match self {
            Self::Closed => "closed",
            Self::Open => "open",
            Self::Wigner => "wigner",
            Self::Quadrature => "quadrature",
            Self::Sweep => "sweep",
            Self::DetectTimes => "detect-times",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("expected one of {}", Self::ALL.map(Mode::name).join(", ")))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig1a,
    Fig2,
    Fig3a,
    Fig3b,
    FigS1,
    FigS3,
    FigS4,
    FigS5,
    /// The fig2 run expressed in SI angular frequencies and seconds.
    Fig2Physical,
}

const FIG2_CORE: &[(&str, &str)] = &[
    ("mode", "open"),
    ("omega_m", "20"),
    ("n0", "1"),
    ("xi", "1.5271"),
    ("delta_over_g", "1"),
    ("gamma_c", "0.2"),
    ("gamma_m", "1e-4"),
    ("n_th", "4"),
    ("n_max", "30"),
    ("initial", "bell"),
    ("t_d", "12.6664"),
    ("t_end", "t_d"),
    ("tomography", "true"),
];

impl Preset {
    pub const ALL: [Preset; 9] = [
        Self::Fig1a,
        Self::Fig2,
        Self::Fig3a,
        Self::Fig3b,
        Self::FigS1,
        Self::FigS3,
        Self::FigS4,
        Self::FigS5,
        Self::Fig2Physical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1a => "fig1a",
            Self::Fig2 => "fig2",
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
            Self::FigS1 => "figS1",
            Self::FigS3 => "figS3",
            Self::FigS4 => "figS4",
            Self::FigS5 => "figS5",
            Self::Fig2Physical => "fig2_physical",
        }
    }

    pub fn entries(self) -> Vec<(&'static str, &'static str)> {
        let with = |extra: &[(&'static str, &'static str)]| {
            let mut v = FIG2_CORE.to_vec();
            v.extend_from_slice(extra);
            v
        };
        match self {
            Self::Fig1a => vec![
                ("mode", "sweep"),
                ("n0", "1"),
                ("xi_list", "1.5271,4.9847"),
                ("delta_min", "0.05"),
                ("delta_max", "0.5"),
                ("n_delta", "91"),
            ],
            Self::Fig2 => with(&[]),
            Self::Fig3a => with(&[("scan_key", "gamma_m"), ("scan_values", "1e-4,5e-4,1e-3")]),
            Self::Fig3b => with(&[("scan_key", "n_th"), ("scan_values", "1,5,10")]),
            Self::FigS1 => vec![
                ("mode", "closed"),
                ("omega_m", "20"),
                ("n0", "1"),
                ("xi", "1.5271"),
                ("delta_over_g", "1"),
                ("initial", "right"),
                ("t_end", "2t0"),
                ("record_stride", "4"),
                ("compare_single_mode", "true"),
            ],
            Self::FigS3 => vec![
                ("mode", "closed"),
                ("n0", "1"),
                ("xi", "1.5271"),
                ("delta_over_g", "1"),
                ("initial", "bell"),
                ("n_max", "30"),
                ("t_end", "2t0"),
                ("scan_key", "omega_m"),
                ("scan_values", "20,40,100"),
            ],
            Self::FigS4 => vec![
                ("mode", "closed"),
                ("omega_m", "20"),
                ("n0", "1"),
                ("xi", "1.5271"),
                ("initial", "bell"),
                ("t_end", "t0"),
                ("scan_key", "delta_over_g"),
                ("scan_values", "0.6,0.8,1,1.2,1.4,1.6,1.8"),
            ],
            Self::FigS5 => vec![
                ("mode", "quadrature"),
                ("n0", "1"),
                ("xi", "1.5271"),
                ("delta_over_g", "1"),
                ("initial", "bell"),
                ("state_source", "closed"),
                ("n_max", "30"),
                ("t_end", "t_d"),
                ("scan_key", "omega_m,t_d"),
                ("scan_values", "20:12.6664,40:12.8285,100:12.9228"),
            ],
            Self::Fig2Physical => vec![
                ("mode", "open"),
                ("units", "physical"),
                ("omega_c", "2pi*5e9"),
                ("omega_m", "2pi*10e6"),
                ("g0", "2pi*500e3"),
                ("n0", "1"),
                ("xi", "1.5271"),
                ("delta_over_g", "1"),
                ("gamma_c", "2pi*100e3"),
                ("gamma_m", "2pi*50"),
                ("n_th", "4"),
                ("n_max", "30"),
                ("initial", "bell"),
                ("t_d", "12.6664/g0"),
                ("t_end", "t_d"),
                ("tomography", "true"),
            ],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| ConfigError::UnknownPreset(s.to_string()))
    }
}

/// Scaled units take every rate in units of `g0` (and `g0 = 1` unless
/// given); physical units take rates in rad/s and times in seconds and are
/// divided by `g0` at parse time.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Units {
    Scaled,
    Physical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialState {
    Left,
    Right,
    Bell,
    /// Density-matrix snapshot in the binary layout written by
    /// [`SystemDensityMatrix::write_binary`](crate::open::SystemDensityMatrix::write_binary);
    /// open runs only.
    File(PathBuf),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StateSource {
    Analytic,
    Closed,
    Open,
}

/// Parameter scan: each tuple in `values` assigns one value per key.
#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub keys: Vec<String>,
    pub values: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Option<Preset>,
    pub units: Units,
    /// Rates in units of `g0` (`params.g0 == 1`).
    pub params: SystemParams,
    /// `g0` in the input units, the factor removed at parse time.
    pub g0_scale: f64,
    pub cutoff: FockCutoff,
    pub solver: SolverConfig,
    pub initial: InitialState,
    pub t_d: Option<f64>,
    pub theta: Option<f64>,
    pub state_source: StateSource,
    pub grid: PhaseSpaceGrid,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub xi_list: Vec<f64>,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_delta: usize,
    pub window_center: Option<f64>,
    pub window_half_width: Option<f64>,
    pub scan: Option<Scan>,
    pub compare_single_mode: bool,
    pub tomography: bool,
    pub dump_snapshot: bool,
    pub output_dir: Option<PathBuf>,
    /// Resolved key/value entries this configuration was built from.
    pub entries: BTreeMap<String, String>,
}

/// Splits a document into `(key, value)` pairs. `#` starts a comment.
pub fn parse_document(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: k + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: k + 1, message: "empty key".into() });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Parses `key=value` as given on the command line.
pub fn parse_override(text: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = text.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line: 0,
        message: format!("override `{text}` is not of the form key=value"),
    })?;
    let k = k.trim();
    if !KEYS.contains(&k) {
        return Err(ConfigError::UnknownKey(k.to_string()));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn apply_layer(
    entries: &mut BTreeMap<String, String>,
    layer: &[(String, String)],
    source: &str,
) -> Result<(), ConfigError> {
    let tuning: Vec<&str> = layer.iter().map(|(k, _)| k.as_str()).filter(|k| TUNING_KEYS.contains(k)).collect();
    if tuning.len() > 1 {
        return Err(ConfigError::Conflict(tuning.join(", ")));
    }
    if let Some(t) = tuning.first() {
        for other in TUNING_KEYS.iter().filter(|k| *k != t) {
            if let Some(old) = entries.remove(*other) {
                info!("{source}: `{t}` replaces `{other}` = {old}");
            }
        }
    }
    for (k, v) in layer {
        if let Some(old) = entries.insert(k.clone(), v.clone()) {
            if old != *v {
                info!("{source}: override {k} = {v} (was {old})");
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Parses a document on its own.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::resolve(text, None, &[])
    }

    /// Layers `preset` (the explicit argument wins over a `preset` key in
    /// the document), the document and `overrides`.
    pub fn resolve(text: &str, preset: Option<Preset>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let doc = parse_document(text)?;
        let doc_preset = doc.iter().find(|(k, _)| k == "preset").map(|(_, v)| v.parse::<Preset>()).transpose()?;
        let over_preset =
            overrides.iter().find(|(k, _)| k == "preset").map(|(_, v)| v.parse::<Preset>()).transpose()?;
        let preset = over_preset.or(preset).or(doc_preset);

        let mut entries = BTreeMap::new();
        if let Some(p) = preset {
            for (k, v) in p.entries() {
                entries.insert(k.to_string(), v.to_string());
            }
        }
        let strip = |layer: &[(String, String)]| -> Vec<(String, String)> {
            layer.iter().filter(|(k, _)| k != "preset").cloned().collect()
        };
        apply_layer(&mut entries, &strip(&doc), "document")?;
        apply_layer(&mut entries, &strip(overrides), "--set")?;
        if let Some(p) = preset {
            entries.insert("preset".into(), p.name().into());
        }
        Self::from_entries(entries)
    }

    /// Builds and validates a configuration from resolved entries.
    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        // keys set only by a scan take their first scanned value at the top level
        let mut effective = entries.clone();
        if let Some(scan) = (Builder { e: &entries }).scan()? {
            for (k, v) in scan.keys.iter().zip(&scan.values[0]) {
                let tuning_set =
                    TUNING_KEYS.contains(&k.as_str()) && TUNING_KEYS.iter().any(|t| entries.contains_key(*t));
                if !effective.contains_key(k) && !tuning_set {
                    effective.insert(k.clone(), v.clone());
                }
            }
        }
        let mut cfg = Builder { e: &effective }.build()?;
        cfg.entries = entries;
        Ok(cfg)
    }

    /// Document that parses back to an equal configuration.
    pub fn to_kv(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// One configuration per scan tuple, labelled `key=value[,key=value]`;
    /// a single unlabelled entry without a scan.
    pub fn expand(&self) -> Result<Vec<(String, RunConfig)>, ConfigError> {
        let Some(scan) = &self.scan else {
            return Ok(vec![(String::new(), self.clone())]);
        };
        scan.values
            .iter()
            .map(|tuple| {
                let mut e = self.entries.clone();
                e.remove("scan_key");
                e.remove("scan_values");
                let mut label = Vec::new();
                for (k, v) in scan.keys.iter().zip(tuple) {
                    if TUNING_KEYS.contains(&k.as_str()) {
                        for t in TUNING_KEYS {
                            e.remove(t);
                        }
                    }
                    e.insert(k.clone(), v.clone());
                    label.push(format!("{k}={v}"));
                }
                Ok((label.join(","), Self::from_entries(e)?))
            })
            .collect()
    }
}

struct Builder<'a> {
    e: &'a BTreeMap<String, String>,
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), value: value.into(), reason: reason.into() }
}

/// A number, optionally written `2pi*<number>`.
fn parse_number(key: &str, v: &str) -> Result<f64, ConfigError> {
    let (factor, rest) = match v.strip_prefix("2pi*") {
        Some(r) => (2.0 * PI, r),
        None => (1.0, v),
    };
    let x: f64 = rest.trim().parse().map_err(|_| invalid(key, v, "not a number"))?;
    if !x.is_finite() {
        return Err(invalid(key, v, "not finite"));
    }
    Ok(factor * x)
}

impl Builder<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.e.get(key).map(String::as_str)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| parse_number(key, v)).transpose()
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key).map(|v| v.parse::<usize>().map_err(|_| invalid(key, v, "not a non-negative integer"))).transpose()
    }

    fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => Err(invalid(key, v, "expected true or false")),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v.split(',').map(|x| parse_number(key, x.trim())).collect(),
        }
    }

    fn build(&self) -> Result<RunConfig, ConfigError> {
        let mut missing = Vec::new();
        let mode = match self.get("mode") {
            Some(v) => Some(v.parse::<Mode>().map_err(|r| invalid("mode", v, r))?),
            None => {
                missing.push("mode".to_string());
                None
            }
        };
        let physics = mode != Some(Mode::Sweep);
        if physics {
            for k in ["omega_m", "xi"] {
                if self.get(k).is_none() {
                    missing.push(k.into());
                }
            }
            if TUNING_KEYS.iter().all(|k| self.get(k).is_none()) {
                missing.push(TUNING_KEYS.join(" | "));
            }
        } else {
            for k in ["xi_list", "delta_min", "delta_max", "n_delta"] {
                if self.get(k).is_none() {
                    missing.push(k.into());
                }
            }
        }
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let mode = mode.expect("checked above");
        let tuning: Vec<&str> = TUNING_KEYS.iter().copied().filter(|k| self.get(k).is_some()).collect();
        if tuning.len() > 1 {
            return Err(ConfigError::Conflict(tuning.join(", ")));
        }

        let preset = self.get("preset").map(str::parse).transpose()?;
        let units = match self.get("units") {
            None | Some("scaled") => Units::Scaled,
            Some("physical") => Units::Physical,
            Some(v) => return Err(invalid("units", v, "expected scaled or physical")),
        };
        let g0_scale = self.number_or("g0", 1.0)?;
        if g0_scale.partial_cmp(&0.0) != Some(Ordering::Greater) {
            return Err(invalid("g0", self.get("g0").unwrap_or(""), "must be positive"));
        }
        if units == Units::Scaled && (g0_scale - 1.0).abs() > 0.0 {
            info!("scaled units with g0 = {g0_scale}: rates are divided by g0");
        }
        let rate =
            |key: &str, default: f64| -> Result<f64, ConfigError> { Ok(self.number_or(key, default)? / g0_scale) };
        let n0 = match self.count("n0")? {
            Some(n) => u32::try_from(n).map_err(|_| invalid("n0", self.get("n0").unwrap_or(""), "too large"))?,
            None => 1,
        };

        let mut params = SystemParams {
            omega_c: rate("omega_c", 0.0)?,
            omega_m: rate("omega_m", 20.0)?,
            g0: 1.0,
            xi: self.number_or("xi", 0.0)?,
            n0,
            omega_0: 1.0,
            gamma_c: rate("gamma_c", 0.0)?,
            gamma_m: rate("gamma_m", 0.0)?,
            n_th: self.number_or("n_th", 0.0)?,
        };
        if n0 == 0 {
            return Err(invalid("n0", "0", "must be at least 1"));
        }
        if let Some(w0) = self.number("omega_0")? {
            params.omega_0 = w0 / g0_scale;
        } else if let Some(delta) = self.number("delta")? {
            params.set_detuning(delta / g0_scale);
        } else if let Some(r) = self.number("delta_over_g")? {
            params.set_detuning(r * params.coupling());
        } else {
            params.omega_0 = params.omega_m / (2.0 * n0 as f64);
        }
        if physics {
            params.validate().map_err(|e| invalid("params", "", e.to_string()))?;
        }
        let d = params.derive();

        let time_scale = match units {
            Units::Scaled => 1.0,
            Units::Physical => g0_scale,
        };
        let t_d = self.get("t_d").map(|v| self.time("t_d", v, None, time_scale, &d)).transpose()?;
        let t_end = match self.get("t_end") {
            Some(v) => self.time("t_end", v, t_d, time_scale, &d)?,
            None => match (t_d, d.t0()) {
                (Some(t), _) => t,
                (None, Some(t0)) => t0,
                (None, None) if physics => return Err(ConfigError::Missing(vec!["t_end".into()])),
                (None, None) => 0.0,
            },
        };
        if t_end < 0.0 {
            return Err(invalid("t_end", self.get("t_end").unwrap_or(""), "must be non-negative"));
        }

        let beta_sq = match d.beta_max {
            Some(b) => b * b,
            None => (d.g * t_end).powi(2),
        };
        let auto_cut = FockCutoff::for_amplitude(beta_sq);
        let cutoff = match self.count("n_max")? {
            Some(n) => FockCutoff::new(n).map_err(|e| invalid("n_max", &n.to_string(), e.to_string()))?,
            None if mode == Mode::Open => FockCutoff::new(auto_cut.n_max().max(30)).expect("positive"),
            None => auto_cut,
        };

        let mut solver = if physics {
            SolverConfig::default_for(&params, t_end)
        } else {
            SolverConfig { dt: 1.0, t_end: 0.0, record_stride: 1 }
        };
        if let Some(dt) = self.number("dt")? {
            solver.dt = dt * time_scale;
        }
        if let Some(s) = self.count("record_stride")? {
            solver.record_stride = s;
        }
        if physics {
            solver.validate(&params).map_err(|e| invalid("dt", self.get("dt").unwrap_or("default"), e.to_string()))?;
        }

        let initial = match self.get("initial") {
            None | Some("bell") => InitialState::Bell,
            Some("left") => InitialState::Left,
            Some("right") => InitialState::Right,
            Some(v) => match v.strip_prefix("file:") {
                Some(path) => InitialState::File(PathBuf::from(path)),
                None => return Err(invalid("initial", v, "expected left, right, bell or file:<path>")),
            },
        };
        let state_source = match self.get("state_source") {
            None | Some("analytic") => StateSource::Analytic,
            Some("closed") => StateSource::Closed,
            Some("open") => StateSource::Open,
            Some(v) => return Err(invalid("state_source", v, "expected analytic, closed or open")),
        };

        let grid = PhaseSpaceGrid {
            re_min: self.number_or("grid_re_min", -4.5)?,
            re_max: self.number_or("grid_re_max", 4.5)?,
            im_min: self.number_or("grid_im_min", -4.5)?,
            im_max: self.number_or("grid_im_max", 4.5)?,
            n_re: self.count("grid_n_re")?.unwrap_or(91),
            n_im: self.count("grid_n_im")?.unwrap_or(91),
        };
        grid.validate().map_err(|e| invalid("grid", "", e.to_string()))?;
        let (x_min, x_max) = (self.number_or("x_min", -7.0)?, self.number_or("x_max", 7.0)?);
        let n_x = self.count("n_x")?.unwrap_or(561);
        if x_min.partial_cmp(&x_max) != Some(Ordering::Less) || n_x < 2 {
            return Err(invalid("x_min", &x_min.to_string(), "quadrature axis needs x_min < x_max and n_x >= 2"));
        }

        let xi_list = self.list("xi_list")?;
        let delta_min = self.number_or("delta_min", 0.05)?;
        let delta_max = self.number_or("delta_max", 0.5)?;
        let n_delta = self.count("n_delta")?.unwrap_or(91);
        if mode == Mode::Sweep && !(delta_min > 0.0 && delta_max > delta_min && n_delta >= 2) {
            return Err(invalid(
                "delta_min",
                &delta_min.to_string(),
                "need 0 < delta_min < delta_max and n_delta >= 2",
            ));
        }

        let window_center = self.number("window_center")?.map(|t| t * time_scale);
        let window_half_width = self.number("window_half_width")?.map(|t| t * time_scale);
        let scan = self.scan()?;

        Ok(RunConfig {
            mode,
            preset,
            units,
            params,
            g0_scale,
            cutoff,
            solver,
            initial,
            t_d,
            theta: self.number("theta")?,
            state_source,
            grid,
            x_min,
            x_max,
            n_x,
            xi_list,
            delta_min,
            delta_max,
            n_delta,
            window_center,
            window_half_width,
            scan,
            compare_single_mode: self.flag("compare_single_mode")?,
            tomography: self.flag("tomography")?,
            dump_snapshot: self.flag("dump_snapshot")?,
            output_dir: self.get("output_dir").map(PathBuf::from),
            entries: self.e.clone(),
        })
    }

    /// A time: a number (seconds in physical units), `<k>t0` for multiples
    /// of `pi/delta`, `<x>/g0`, or `t_d`.
    fn time(
        &self,
        key: &str,
        v: &str,
        t_d: Option<f64>,
        scale: f64,
        d: &crate::model::DerivedModulation,
    ) -> Result<f64, ConfigError> {
        if v == "t_d" {
            return t_d.ok_or_else(|| invalid(key, v, "t_d is not set"));
        }
        if let Some(k) = v.strip_suffix("t0") {
            let t0 = d.t0().ok_or_else(|| invalid(key, v, "t0 undefined at zero detuning"))?;
            let k = if k.is_empty() { 1.0 } else { parse_number(key, k)? };
            return Ok(k * t0);
        }
        if let Some(x) = v.strip_suffix("/g0") {
            return parse_number(key, x);
        }
        Ok(parse_number(key, v)? * scale)
    }

    fn scan(&self) -> Result<Option<Scan>, ConfigError> {
        let (keys, values) = match (self.get("scan_key"), self.get("scan_values")) {
            (None, None) => return Ok(None),
            (Some(k), Some(v)) => (k, v),
            _ => return Err(ConfigError::Missing(vec!["scan_key and scan_values".into()])),
        };
        let keys: Vec<String> = keys.split(',').map(|k| k.trim().to_string()).collect();
        for k in &keys {
            if !KEYS.contains(&k.as_str())
                || ["mode", "preset", "scan_key", "scan_values", "output_dir"].contains(&k.as_str())
            {
                return Err(invalid("scan_key", k, "not a scannable key"));
            }
        }
        let values: Vec<Vec<String>> =
            values.split(',').map(|t| t.split(':').map(|x| x.trim().to_string()).collect()).collect();
        if let Some(bad) = values.iter().find(|t| t.len() != keys.len()) {
            return Err(invalid("scan_values", &bad.join(":"), format!("expected {} value(s) per entry", keys.len())));
        }
        Ok(Some(Scan { keys, values }))
    }
}
