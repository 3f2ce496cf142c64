//! Run configuration: a key/value file merged with command-line overrides.
//!
//! ```text
//! # system, either inline keys, a bundled name or another file
//! system = center-linear        # doubling | cat | endomorphism | product | center-linear | mane
//! # system_config = mane.conf   # path relative to this file
//! # kind = linear
//! # matrix = 2 1; 1 1
//!
//! potential = 0.5*cos(x1) + 0.2  # terms joined by +: numbers and A*cos(xI)
//! holder_constant = 3.2          # optional overrides of K and α
//! holder_exponent = 1
//!
//! delta = 0.01
//! eps = 0.001
//! r = 0.01
//! n_min = 3
//! n_max = 7
//! depth = 40
//! seed = 7
//! ```
//!
//! Every other recognised key is a budget or a command setting; see
//! [`RUN_KEYS`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use torus_pressure::pressure::Potential;
use torus_pressure::specification::SCALE_RATIO;
use torus_pressure::systems::bundled;
use torus_pressure::systems::config::{parse_key_values, SystemConfig, SYSTEM_KEYS};
use torus_pressure::SystemSpec;

pub const RUN_KEYS: [&str; 33] = [
    "system",
    "system_config",
    "potential",
    "holder_constant",
    "holder_exponent",
    "delta",
    "eps",
    "r",
    "n_min",
    "n_max",
    "depth",
    "seed",
    "candidate_budget",
    "orbit_samples",
    "orbit_sample_length",
    "resolution",
    "explicit_cap",
    "branch_cap",
    "base_points",
    "segments",
    "min_length",
    "max_length",
    "probes",
    "samples",
    "window",
    "windows",
    "gamma_budget",
    "r_values",
    "pressure_delta",
    "draws",
    "matrix_jitter",
    "strength_jitter",
    "potential_jitter",
];

/// Extra keys that only toggle output.
pub const FLAG_KEYS: [&str; 1] = ["trace"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sets,
    EigenOracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sets => "sets",
            Mode::EigenOracle => "eigen-oracle",
        }
    }
}

/// A configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub system: SystemConfig,
    /// Bundled name or `custom`.
    pub system_label: String,
    pub potential_spec: String,
    pub values: BTreeMap<String, String>,
    pub seed: u64,
    pub out: PathBuf,
    pub mode: Mode,
    pub warnings: Vec<String>,
}

pub fn bundled_system(name: &str) -> Result<SystemConfig> {
    use torus_pressure::systems::SystemKind;
    let linear = |m| SystemConfig {
        kind: SystemKind::Linear,
        matrix: m,
        q: None,
        rho: None,
        rho_inner: None,
        strength: None,
        rotation: None,
    };
    Ok(match name {
        "doubling" => linear(bundled::doubling_matrix()),
        "cat" => linear(bundled::cat_matrix()),
        "endomorphism" => linear(bundled::endomorphism_matrix()),
        "center-linear" => linear(bundled::center_matrix()),
        "product" => SystemConfig {
            kind: SystemKind::ProductRotation,
            rotation: Some(bundled::DEFAULT_ROTATION),
            ..linear(bundled::endomorphism_matrix())
        },
        "mane" => SystemConfig::mane_example(bundled::DEFAULT_STRENGTH),
        other => return Err(config_error(format!("unknown bundled system {other}"))),
    })
}

/// Parses `A*cos(xI)`, `cos(xI)` and numeric terms joined by `+`.
pub fn parse_potential(spec: &str) -> Result<Potential> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "zero" {
        return Ok(Potential::zero());
    }
    let mut phi = Potential::zero();
    for term in spec.split('+').map(str::trim) {
        if let Some(idx) = term.find("cos(x") {
            let amp = match term[..idx].trim().trim_end_matches('*').trim() {
                "" => 1.0,
                "-" => -1.0,
                a => a.parse::<f64>().map_err(|_| config_error(format!("potential: bad amplitude in {term}")))?,
            };
            let coord: usize = term[idx + 5..]
                .trim_end_matches(')')
                .parse()
                .map_err(|_| config_error(format!("potential: bad coordinate in {term}")))?;
            if coord == 0 {
                return Err(config_error("potential: coordinates are numbered from 1"));
            }
            phi = phi.plus_cosine(coord - 1, amp);
        } else {
            let c: f64 = term.parse().map_err(|_| config_error(format!("potential: bad term {term}")))?;
            phi = phi.shifted(c);
        }
    }
    if !phi.sup_norm_bound().is_some_and(f64::is_finite) {
        return Err(config_error("potential: coefficients must be finite"));
    }
    Ok(phi.renamed(spec))
}

fn read_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    parse_key_values(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Merges the config file (if any) with `overrides`, which win.
    pub fn load(
        path: Option<&Path>,
        overrides: &BTreeMap<String, String>,
        seed: Option<u64>,
        out: PathBuf,
        mode: Mode,
    ) -> Result<Self> {
        let mut values = match path {
            Some(p) => read_map(p)?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            values.insert(k.clone(), v.clone());
        }
        for k in values.keys() {
            let known = RUN_KEYS.contains(&k.as_str())
                || SYSTEM_KEYS.contains(&k.as_str())
                || FLAG_KEYS.contains(&k.as_str());
            if !known {
                return Err(config_error(format!("unknown key {k}")));
            }
        }
        let inline = SYSTEM_KEYS.iter().any(|k| values.contains_key(*k));
        let sources = [values.contains_key("system"), values.contains_key("system_config"), inline];
        if sources.iter().filter(|&&b| b).count() > 1 {
            return Err(config_error("give the system once: inline keys, system or system_config"));
        }
        let (system, system_label) = if let Some(name) = values.get("system") {
            (bundled_system(name)?, name.clone())
        } else if let Some(rel) = values.get("system_config") {
            let base = path.and_then(Path::parent).unwrap_or(Path::new("."));
            let text = fs::read_to_string(base.join(rel))
                .map_err(|e| config_error(format!("cannot read system config {rel}: {e}")))?;
            (SystemConfig::parse(&text).map_err(|e| config_error(e.to_string()))?, "custom".to_string())
        } else if inline {
            (SystemConfig::from_map(&values).map_err(|e| config_error(e.to_string()))?, "custom".to_string())
        } else {
            return Err(config_error("no system given (use --system, a system key or system_config)"));
        };
        let seed = match seed {
            Some(s) => s,
            None => match values.get("seed") {
                Some(v) => v.parse().map_err(|_| config_error(format!("seed: not an integer: {v}")))?,
                None => return Err(config_error("a seed is required (--seed or seed = N)")),
            },
        };
        let potential_spec = values.get("potential").cloned().unwrap_or_else(|| "zero".into());
        let cfg = RunConfig { system, system_label, potential_spec, values, seed, out, mode, warnings: Vec::new() };
        cfg.potential()?;
        for key in ["delta", "eps", "r", "pressure_delta", "holder_constant", "holder_exponent"] {
            if let Some(v) = cfg.opt_f64(key)? {
                if !(v > 0.0) {
                    return Err(config_error(format!("{key} must be positive, got {v}")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn build_system(&self) -> Result<SystemSpec> {
        self.system.build().map_err(|e| config_error(format!("system: {e}")))
    }

    pub fn potential(&self) -> Result<Potential> {
        let mut phi = parse_potential(&self.potential_spec)?;
        if let Some(k) = self.opt_f64("holder_constant")? {
            phi.holder_constant = k;
        }
        if let Some(a) = self.opt_f64("holder_exponent")? {
            if a > 1.0 {
                return Err(config_error(format!("holder_exponent must be in (0, 1], got {a}")));
            }
            phi.holder_exponent = a;
        }
        Ok(phi)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| config_error(format!("{key}: not a finite number: {v}")))
            })
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            Some(v) => v.parse().map_err(|_| config_error(format!("{key}: not a nonnegative integer: {v}"))),
            None => Ok(default),
        }
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            Some(v) => v
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| config_error(format!("{key}: bad entry {t}"))))
                .collect(),
            None => Ok(default.to_vec()),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.values.get(key).map(String::as_str) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => Err(config_error(format!("{key}: expected true or false, got {v}"))),
        }
    }

    pub fn n_range(&self, default: (usize, usize)) -> Result<(usize, usize)> {
        let r = (self.usize_or("n_min", default.0)?, self.usize_or("n_max", default.1)?);
        if r.0 == 0 || r.1 <= r.0 {
            return Err(config_error(format!("n range {}..={} must start at 1 or later and hold two values", r.0, r.1)));
        }
        Ok(r)
    }

    /// Records the scale-relation warning when `ε < 2000 δ`.
    pub fn check_scale_relation(&mut self, delta: f64, eps: f64) {
        if eps < SCALE_RATIO * delta {
            let w = format!("eps = {eps} is below {SCALE_RATIO} * delta = {}", SCALE_RATIO * delta);
            eprintln!("warning: {w}");
            self.warnings.push(w);
        }
    }
}
