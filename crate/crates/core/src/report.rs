//! Deterministic report output: JSON with sorted keys and floats rounded to
//! twelve significant digits, plus plain CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Result, WedgeError};

const SIG_DIGITS: usize = 12;

/// Rounds to `SIG_DIGITS` significant digits; maps `-0` to `0`.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Shortest decimal form of the rounded value; non-finite values spelled out.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let r = round_sig(v);
        let a = r.abs();
        if a == 0.0 || (1e-4..1e15).contains(&a) { format!("{r}") } else { format!("{r:e}") }
    }
}

fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted object keys and rounded floats. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| WedgeError::Config(format!("cannot serialize report: {e}")))?;
    let mut s = serde_json::to_string_pretty(&canonical(value))
        .map_err(|e| WedgeError::Config(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| {
            cells
                .iter()
                .map(|c| if c.contains([',', '"', '\n']) { format!("\"{}\"", c.replace('"', "\"\"")) } else { c.clone() })
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(out, "{}", line(&self.header));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }
}

/// Joins a list of numbers with `;` for a single CSV cell.
pub fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(";")
}

pub fn join_ints(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// A named output file.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, v: &T) -> Result<Self> {
        Ok(Self { name: format!("{name}.json"), contents: to_json(v)? })
    }

    pub fn csv(name: &str, t: &Csv) -> Self {
        Self { name: format!("{name}.csv"), contents: t.render() }
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| WedgeError::Io { path: dir.display().to_string(), source: e })?;
    for a in artifacts {
        let p = dir.join(&a.name);
        std::fs::write(&p, &a.contents).map_err(|e| WedgeError::Io { path: p.display().to_string(), source: e })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_rounded_and_signless_zero() {
        assert_eq!(fmt_float(-0.0), "0");
        assert_eq!(fmt_float(0.1 + 0.2), "0.3");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(1.72664745655e-9), "1.72664745655e-9");
        assert_eq!(fmt_float(2.5e-4), "0.00025");
    }

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: Vec<f64>,
        }
        let s = to_json(&S { zeta: 1.0 / 3.0, alpha: vec![f64::NAN, 2.0] }).unwrap();
        let a = s.find("alpha").unwrap();
        let z = s.find("zeta").unwrap();
        assert!(a < z);
        assert!(s.contains("0.333333333333"));
        assert!(s.contains("null"));
    }

    #[test]
    fn csv_quotes_separators() {
        let mut t = Csv::new(&["a", "b"]);
        t.push(vec!["1,2".into(), "x".into()]);
        assert_eq!(t.render(), "a,b\n\"1,2\",x\n");
    }
}
