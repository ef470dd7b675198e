//! Report rendering and atomic file output.
//!
//! Reports are built once as JSON values and rendered either as JSON or as
//! CSV. A single record becomes a two-column `field,value` table with nested
//! keys joined by dots; a curve becomes one row per point. Numbers carry 12
//! significant digits.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use qcompat::{CMat, HermitianOperator};
use serde_json::{json, Map, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// A rounded number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn matrix(m: &CMat) -> Value {
    let part = |f: fn(&qcompat::Complex64) -> f64| -> Value {
        Value::Array(
            (0..m.nrows())
                .map(|i| nums(&(0..m.ncols()).map(|j| f(&m[(i, j)])).collect::<Vec<_>>()))
                .collect(),
        )
    };
    json!({ "matrix_re": part(|z| z.re), "matrix_im": part(|z| z.im) })
}

/// Trace and extreme eigenvalues of an operator.
pub fn spectrum_summary(h: &HermitianOperator) -> Value {
    let e = h.eigenvalues();
    json!({
        "trace": num(h.trace()),
        "min_eigenvalue": num(e[0]),
        "max_eigenvalue": num(e[e.len() - 1]),
    })
}

/// Plain decimal for moderate magnitudes, exponent notation otherwise.
fn number_text(n: &serde_json::Number) -> String {
    match n.as_f64() {
        Some(x) if x != 0.0 && !(1e-5..1e15).contains(&x.abs()) => format!("{x:e}"),
        Some(x) if n.is_f64() => format!("{x}"),
        _ => n.to_string(),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "nan".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => number_text(n),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, x)| flatten(&key(k), x, out)),
        Value::Array(xs) => xs
            .iter()
            .enumerate()
            .for_each(|(i, x)| flatten(&key(&i.to_string()), x, out)),
        leaf => out.push((prefix.to_string(), cell(leaf))),
    }
}

fn csv_text(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory succeeds");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory succeeds")).expect("CSV of UTF-8 cells is UTF-8")
}

/// `field,value` CSV of a single report.
pub fn record_csv(v: &Value) -> String {
    let mut pairs = Vec::new();
    flatten("", v, &mut pairs);
    csv_text(std::iter::once(vec!["field".into(), "value".into()]).chain(pairs.into_iter().map(|(k, x)| vec![k, x])))
}

/// CSV with one row per object, taking the given fields as columns.
pub fn table_csv(columns: &[&str], rows: &[Map<String, Value>]) -> String {
    let header = columns.iter().map(|c| c.to_string()).collect();
    let body = rows.iter().map(|r| {
        columns
            .iter()
            .map(|c| r.get(*c).map_or_else(String::new, cell))
            .collect()
    });
    csv_text(std::iter::once(header).chain(body))
}

pub fn json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failure never leaves a partial file behind.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(content.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
