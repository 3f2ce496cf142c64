//! Plain-text key/value system definitions.
//!
//! ```text
//! # comment
//! kind = mane                 # linear | product-rotation | mane
//! matrix = 100 1 0; -100 0 1; 3 0 0
//! q = 0 0 0                   # mane only
//! rho = 0.05                  # mane only
//! rho_inner = 0.025           # mane only
//! strength = 0.1              # mane only
//! rotation = 0.001            # product-rotation only (angle on the extra circle)
//! ```
//!
//! Floats are written in shortest round-trip form, so `parse(to_text(c)) == c`.

use std::collections::BTreeMap;

use super::{build_mane_example, IntMatrix, LinearToralSpec, SystemKind, SystemSpec, TorusPoint};
use crate::error::{Error, Result};

pub const SYSTEM_KEYS: [&str; 7] = ["kind", "matrix", "q", "rho", "rho_inner", "strength", "rotation"];

/// Parsed system definition.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub matrix: IntMatrix,
    pub q: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub rho_inner: Option<f64>,
    pub strength: Option<f64>,
    pub rotation: Option<f64>,
}

/// Splits `key = value` lines, dropping comments and blank lines.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().to_string();
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
        }
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Config(format!("{key}: not a number: {v}")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite")));
    }
    Ok(x)
}

fn parse_floats(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| parse_f64(key, t)).collect()
}

fn parse_matrix(v: &str) -> Result<IntMatrix> {
    let rows = v
        .split(';')
        .map(|row| {
            row.split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| Error::Config(format!("matrix: bad entry {t}"))))
                .collect::<Result<Vec<i64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    IntMatrix::from_rows(&rows).map_err(|e| Error::Config(format!("matrix: {e}")))
}

impl SystemConfig {
    /// Strict parse: unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        if let Some(k) = map.keys().find(|k| !SYSTEM_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k}")));
        }
        SystemConfig::from_map(&map)
    }

    /// Reads the system keys from a larger map, ignoring other keys.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let kind = match get("kind") {
            Some("linear") => SystemKind::Linear,
            Some("product-rotation") => SystemKind::ProductRotation,
            Some("mane") => SystemKind::Mane,
            Some(other) => return Err(Error::Config(format!("unknown kind {other}"))),
            None => return Err(Error::Config("missing key kind".into())),
        };
        let matrix = parse_matrix(get("matrix").ok_or_else(|| Error::Config("missing key matrix".into()))?)?;
        let opt = |k: &str| get(k).map(|v| parse_f64(k, v)).transpose();
        let cfg = SystemConfig {
            kind,
            matrix,
            q: get("q").map(|v| parse_floats("q", v)).transpose()?,
            rho: opt("rho")?,
            rho_inner: opt("rho_inner")?,
            strength: opt("strength")?,
            rotation: opt("rotation")?,
        };
        let mane_keys = cfg.q.is_some() || cfg.rho.is_some() || cfg.rho_inner.is_some() || cfg.strength.is_some();
        match kind {
            SystemKind::Mane => {
                if cfg.q.is_none() || cfg.rho.is_none() || cfg.rho_inner.is_none() || cfg.strength.is_none() {
                    return Err(Error::Config("mane needs q, rho, rho_inner and strength".into()));
                }
                if cfg.rotation.is_some() {
                    return Err(Error::Config("rotation only applies to product-rotation".into()));
                }
            }
            SystemKind::ProductRotation => {
                if cfg.rotation.is_none() {
                    return Err(Error::Config("product-rotation needs rotation".into()));
                }
                if mane_keys {
                    return Err(Error::Config("q/rho/rho_inner/strength only apply to mane".into()));
                }
            }
            SystemKind::Linear => {
                if mane_keys || cfg.rotation.is_some() {
                    return Err(Error::Config("linear takes only kind and matrix".into()));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<String> = self
            .matrix
            .rows()
            .iter()
            .map(|r| r.iter().map(i64::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        let mut s = format!("kind = {}\nmatrix = {}\n", self.kind.name(), rows.join("; "));
        if let Some(q) = &self.q {
            let q: Vec<String> = q.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&format!("q = {}\n", q.join(" ")));
        }
        for (k, v) in [
            ("rho", self.rho),
            ("rho_inner", self.rho_inner),
            ("strength", self.strength),
            ("rotation", self.rotation),
        ] {
            if let Some(v) = v {
                s.push_str(&format!("{k} = {v:?}\n"));
            }
        }
        s
    }

    pub fn build(&self) -> Result<SystemSpec> {
        match self.kind {
            SystemKind::Linear => SystemSpec::linear(self.matrix),
            SystemKind::ProductRotation => {
                SystemSpec::product_rotation(self.matrix, self.rotation.expect("validated"))
            }
            SystemKind::Mane => {
                let q = self.q.as_ref().expect("validated");
                if q.len() != self.matrix.dim() {
                    return Err(Error::Config("q has the wrong dimension".into()));
                }
                let base = LinearToralSpec::new(self.matrix)?;
                build_mane_example(
                    &base,
                    TorusPoint::new(q),
                    self.rho.expect("validated"),
                    self.rho_inner.expect("validated"),
                    self.strength.expect("validated"),
                )
            }
        }
    }

    /// The bundled pitchfork example with the given strength.
    pub fn mane_example(strength: f64) -> Self {
        use super::bundled::*;
        SystemConfig {
            kind: SystemKind::Mane,
            matrix: center_matrix(),
            q: Some(vec![0.0, 0.0, 0.0]),
            rho: Some(DEFAULT_RHO),
            rho_inner: Some(DEFAULT_RHO_INNER),
            strength: Some(strength),
            rotation: None,
        }
    }
}
