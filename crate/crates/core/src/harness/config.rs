//! Run configuration: parsing, validation and the effective-config echo.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::fluid::Limiter;
use crate::linalg::DenseMatrix;
use crate::params::ModelParams;

use super::init::Recipe;

/// Everything a `simulate` or `continuation` run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams<f64>,
    /// x-cells per side of the unit square.
    pub cells: usize,
    pub n_radial: usize,
    pub n_angular: usize,
    pub limiter: Limiter,
    pub final_time: f64,
    pub safety: f64,
    /// Upper bound for the macro step between energy-ledger samples.
    pub dt_max: f64,
    /// Spacing of the metric samples.
    pub sample_interval: f64,
    pub epsilon_list: Vec<f64>,
    pub tracked_modes: usize,
    pub recipe: Recipe,
    pub amplitude: f64,
    pub seed: u64,
    /// Field dumps every `output_stride` samples; 0 disables them.
    pub output_stride: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = ModelParams::default();
        Self {
            epsilon_list: vec![params.epsilon],
            params,
            cells: 32,
            n_radial: 24,
            n_angular: 16,
            limiter: Limiter::MonotonizedCentral,
            final_time: 0.5,
            safety: 0.4,
            dt_max: 2.5e-3,
            sample_interval: 1e-2,
            tracked_modes: 4,
            recipe: Recipe::Balanced,
            amplitude: 0.5,
            seed: 0,
            output_stride: 0,
            output_dir: PathBuf::from("output"),
        }
    }
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("model", &["epsilon", "gamma", "c_p", "mu_s", "mu_b", "polymer_fraction", "delta", "xi_bar", "rho_bar", "b", "rouse", "dim"]),
    ("grid", &["cells", "radial", "angular", "limiter"]),
    ("time", &["final_time", "safety", "dt_max", "sample_interval"]),
    ("continuation", &["epsilon_list", "tracked_modes", "recipe", "amplitude", "seed"]),
    ("output", &["directory", "stride"]),
];

const REQUIRED: [(&str, &str); 2] = [("model", "epsilon"), ("time", "final_time")];

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn float(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(cfg(format!("`{key}` must be a number"))),
    }
}

fn count(v: &Value, key: &str) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(cfg(format!("`{key}` must be a non-negative integer"))),
    }
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| cfg(format!("`{key}` must be a string")))
}

fn floats(v: &Value, key: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| cfg(format!("`{key}` must be a list")))?
        .iter()
        .map(|x| float(x, key))
        .collect()
}

/// Tridiagonal `(−1, 2, −1)` connectivity of a linear chain of `k` springs.
pub fn rouse_matrix(k: usize) -> DenseMatrix<f64> {
    let mut a = DenseMatrix::zeros(k);
    for i in 0..k {
        a[(i, i)] = 2.0;
        if i + 1 < k {
            a[(i, i + 1)] = -1.0;
            a[(i + 1, i)] = -1.0;
        }
    }
    a
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses configuration text. Unknown sections or keys are reported all
/// at once; duplicate keys are rejected by the TOML reader with the key name.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| cfg(e.message().to_string()))?;

    let mut unknown = Vec::new();
    for (name, value) in &table {
        match SECTIONS.iter().find(|(s, _)| s == name) {
            None => unknown.push(name.clone()),
            Some((_, keys)) => match value.as_table() {
                None => return Err(cfg(format!("`{name}` must be a section"))),
                Some(t) => unknown.extend(t.keys().filter(|k| !keys.contains(&k.as_str())).map(|k| format!("{name}.{k}"))),
            },
        }
    }
    if !unknown.is_empty() {
        return Err(cfg(format!("unknown keys: {}", unknown.join(", "))));
    }
    let get = |section: &str, key: &str| table.get(section).and_then(|s| s.get(key));
    let missing: Vec<String> =
        REQUIRED.iter().filter(|(s, k)| get(s, k).is_none()).map(|(s, k)| format!("{s}.{k}")).collect();
    if !missing.is_empty() {
        return Err(cfg(format!("missing required keys: {}", missing.join(", "))));
    }

    let mut c = RunConfig::default();
    let p = &mut c.params;
    for (key, slot) in [
        ("epsilon", &mut p.epsilon),
        ("gamma", &mut p.gamma),
        ("c_p", &mut p.c_p),
        ("mu_s", &mut p.mu_s),
        ("mu_b", &mut p.mu_b),
        ("polymer_fraction", &mut p.polymer_fraction),
        ("delta", &mut p.delta),
        ("xi_bar", &mut p.xi_bar),
        ("rho_bar", &mut p.rho_bar),
    ] {
        if let Some(v) = get("model", key) {
            *slot = float(v, key)?;
        }
    }
    if let Some(v) = get("model", "b") {
        p.b = floats(v, "b")?;
    }
    if let Some(v) = get("model", "rouse") {
        let rows = v.as_array().ok_or_else(|| cfg("`rouse` must be a list of rows"))?;
        let data: Vec<Vec<f64>> = rows.iter().map(|r| floats(r, "rouse")).collect::<Result<_>>()?;
        let n = data.len();
        if data.iter().any(|r| r.len() != n) {
            return Err(cfg("`rouse` must be square"));
        }
        p.rouse = DenseMatrix::from_rows(&data);
    } else if p.b.len() != p.rouse.dim() {
        p.rouse = rouse_matrix(p.b.len());
    }
    if let Some(v) = get("model", "dim") {
        p.dim = count(v, "dim")?;
    }

    if let Some(v) = get("grid", "cells") {
        c.cells = count(v, "cells")?;
    }
    if let Some(v) = get("grid", "radial") {
        c.n_radial = count(v, "radial")?;
    }
    if let Some(v) = get("grid", "angular") {
        c.n_angular = count(v, "angular")?;
    }
    if let Some(v) = get("grid", "limiter") {
        let name = string(v, "limiter")?;
        c.limiter = Limiter::parse(name).ok_or_else(|| cfg(format!("unknown limiter `{name}`")))?;
    }

    if let Some(v) = get("time", "final_time") {
        c.final_time = float(v, "final_time")?;
    }
    if let Some(v) = get("time", "safety") {
        c.safety = float(v, "safety")?;
    }
    if let Some(v) = get("time", "dt_max") {
        c.dt_max = float(v, "dt_max")?;
    }
    if let Some(v) = get("time", "sample_interval") {
        c.sample_interval = float(v, "sample_interval")?;
    }

    c.epsilon_list = match get("continuation", "epsilon_list") {
        Some(v) => floats(v, "epsilon_list")?,
        None => vec![c.params.epsilon],
    };
    if let Some(v) = get("continuation", "tracked_modes") {
        c.tracked_modes = count(v, "tracked_modes")?;
    }
    if let Some(v) = get("continuation", "recipe") {
        let name = string(v, "recipe")?;
        c.recipe = Recipe::parse(name).ok_or_else(|| cfg(format!("unknown recipe `{name}`")))?;
    }
    if let Some(v) = get("continuation", "amplitude") {
        c.amplitude = float(v, "amplitude")?;
    }
    if let Some(v) = get("continuation", "seed") {
        c.seed = count(v, "seed")? as u64;
    }

    if let Some(v) = get("output", "directory") {
        c.output_dir = PathBuf::from(string(v, "directory")?);
    }
    if let Some(v) = get("output", "stride") {
        c.output_stride = count(v, "stride")?;
    }

    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let report = crate::params::validate(&self.params);
        if !report.is_valid() {
            return Err(Error::InvalidParams(report.violations.join("; ")));
        }
        for (name, n) in [("grid.cells", self.cells), ("grid.radial", self.n_radial), ("grid.angular", self.n_angular)] {
            if n < 8 {
                return Err(cfg(format!("`{name}` = {n} is below the minimum resolution 8")));
            }
        }
        if !(self.final_time > 0.0) {
            return Err(cfg("`time.final_time` must be positive"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(cfg("`time.safety` must lie in (0, 1]"));
        }
        if !(self.dt_max > 0.0) || !(self.sample_interval > 0.0) {
            return Err(cfg("`time.dt_max` and `time.sample_interval` must be positive"));
        }
        if self.epsilon_list.is_empty() {
            return Err(cfg("`continuation.epsilon_list` is empty"));
        }
        if let Some(e) = self.epsilon_list.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(cfg(format!("epsilon {e} is outside (0, 1)")));
        }
        if self.epsilon_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(cfg("`continuation.epsilon_list` must be strictly decreasing"));
        }
        if !(self.amplitude >= 0.0) {
            return Err(cfg("`continuation.amplitude` must be non-negative"));
        }
        Ok(())
    }

    /// The configuration with every default made explicit.
    pub fn effective(&self) -> String {
        let p = &self.params;
        let mut model = Table::new();
        for (k, v) in [
            ("epsilon", p.epsilon),
            ("gamma", p.gamma),
            ("c_p", p.c_p),
            ("mu_s", p.mu_s),
            ("mu_b", p.mu_b),
            ("polymer_fraction", p.polymer_fraction),
            ("delta", p.delta),
            ("xi_bar", p.xi_bar),
            ("rho_bar", p.rho_bar),
        ] {
            model.insert(k.into(), Value::Float(v));
        }
        model.insert("b".into(), Value::Array(p.b.iter().map(|&v| Value::Float(v)).collect()));
        let rows = (0..p.rouse.dim())
            .map(|i| Value::Array((0..p.rouse.dim()).map(|j| Value::Float(p.rouse[(i, j)])).collect()))
            .collect();
        model.insert("rouse".into(), Value::Array(rows));
        model.insert("dim".into(), Value::Integer(p.dim as i64));

        let mut grid = Table::new();
        grid.insert("cells".into(), Value::Integer(self.cells as i64));
        grid.insert("radial".into(), Value::Integer(self.n_radial as i64));
        grid.insert("angular".into(), Value::Integer(self.n_angular as i64));
        grid.insert("limiter".into(), Value::String(self.limiter.name().into()));

        let mut time = Table::new();
        time.insert("final_time".into(), Value::Float(self.final_time));
        time.insert("safety".into(), Value::Float(self.safety));
        time.insert("dt_max".into(), Value::Float(self.dt_max));
        time.insert("sample_interval".into(), Value::Float(self.sample_interval));

        let mut cont = Table::new();
        cont.insert("epsilon_list".into(), Value::Array(self.epsilon_list.iter().map(|&v| Value::Float(v)).collect()));
        cont.insert("tracked_modes".into(), Value::Integer(self.tracked_modes as i64));
        cont.insert("recipe".into(), Value::String(self.recipe.name().into()));
        cont.insert("amplitude".into(), Value::Float(self.amplitude));
        cont.insert("seed".into(), Value::Integer(self.seed as i64));

        let mut out = Table::new();
        out.insert("directory".into(), Value::String(self.output_dir.display().to_string()));
        out.insert("stride".into(), Value::Integer(self.output_stride as i64));

        let mut root = Table::new();
        root.insert("model".into(), Value::Table(model));
        root.insert("grid".into(), Value::Table(grid));
        root.insert("time".into(), Value::Table(time));
        root.insert("continuation".into(), Value::Table(cont));
        root.insert("output".into(), Value::Table(out));
        toml::to_string(&root).expect("plain tables serialise")
    }

    /// Writes `effective_config.toml` into the output directory.
    pub fn write_effective(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join("effective_config.toml");
        std::fs::write(&path, self.effective())?;
        Ok(path)
    }
}
