//! JSON and CSV artifacts.
//!
//! Floats are written with 17 significant digits in exponent form. JSON has
//! no non-finite numbers, so those become the strings `"inf"`, `"-inf"` and
//! `"nan"`. Keys are sorted, so output is byte-stable.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{Map, Number, Value};
use torus_pressure::pressure::PressureEstimate;
use torus_pressure::TorusPoint;

pub const SCHEMA_VERSION: u32 = 1;

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(fmt_f64(x).parse::<Number>().expect("formatted float parses"))
    } else {
        Value::String(fmt_f64(x))
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn point(x: &TorusPoint) -> Value {
    nums(x.coords())
}

/// Starts a versioned record.
pub fn record(schema: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), Value::String(format!("torus-pressure/{schema}")));
    m.insert("version".into(), Value::from(SCHEMA_VERSION));
    m
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn estimate_json(e: &PressureEstimate) -> Value {
    let mut m = Map::new();
    m.insert("value".into(), num(e.value));
    m.insert("delta".into(), num(e.delta));
    m.insert("eps".into(), num(e.eps));
    m.insert("n_min".into(), Value::from(e.n_range.0));
    m.insert("n_max".into(), Value::from(e.n_range.1));
    m.insert("method".into(), Value::from(e.method.name()));
    m.insert("seed".into(), Value::from(e.seed));
    m.insert("sample_size".into(), Value::from(e.sample_size));
    m.insert("counts_monotone".into(), Value::from(e.counts_monotone));
    m.insert("branch_components".into(), Value::from(e.branch_components.clone()));
    let rows = e
        .per_n
        .iter()
        .map(|r| {
            serde_json::json!({
                "n": r.n,
                "count": r.count,
                "logLambda": num(r.log_lambda),
                "slope_so_far": num(r.slope_so_far),
            })
        })
        .collect();
    m.insert("per_n".into(), Value::Array(rows));
    Value::Object(m)
}

pub fn per_n_csv(e: &PressureEstimate) -> String {
    let mut s = String::from("n,count,logLambda,slope_so_far\n");
    for r in &e.per_n {
        s.push_str(&format!("{},{},{},{}\n", r.n, r.count, fmt_f64(r.log_lambda), fmt_f64(r.slope_so_far)));
    }
    s
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
