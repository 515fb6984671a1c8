//! Versioned report envelope for experiment runs, JSON/CSV rendering, and
//! plain-text key=value config handling.

use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub command: String,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub results: Value,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Report {
    pub fn new(command: &str, params: Value, seed: Option<u64>, results: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            tool: ToolInfo {
                name: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            command: command.to_string(),
            params,
            seed,
            results,
            wall_time_ms: 0.0,
        }
    }

    /// Deterministic pretty JSON (serde_json orders object keys).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&json!(self)).expect("report serializes");
        s.push('\n');
        s
    }

    /// Flat CSV: scalar results as `key,value` lines, arrays of flat objects
    /// as header+row tables introduced by a `table,<key>` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command,{}\n", self.command));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed,{seed}\n"));
        }
        if let Value::Object(map) = &self.results {
            for (key, val) in map {
                render_csv_entry(&mut out, key, val);
            }
        } else {
            render_csv_entry(&mut out, "result", &self.results);
        }
        out
    }
}

fn is_flat_object(v: &Value) -> bool {
    matches!(v, Value::Object(m) if m.values().all(|x| !matches!(x, Value::Object(_) | Value::Array(_))))
}

fn scalar_str(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render_csv_entry(out: &mut String, key: &str, val: &Value) {
    match val {
        Value::Array(rows) if !rows.is_empty() && rows.iter().all(is_flat_object) => {
            out.push_str(&format!("table,{key}\n"));
            let Value::Object(first) = &rows[0] else {
                unreachable!()
            };
            let header: Vec<&String> = first.keys().collect();
            out.push_str(
                &header
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            out.push('\n');
            for row in rows {
                let Value::Object(m) = row else { unreachable!() };
                let line: Vec<String> = header
                    .iter()
                    .map(|h| m.get(*h).map(scalar_str).unwrap_or_default())
                    .collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        Value::Object(m) => {
            for (k, v) in m {
                render_csv_entry(out, &format!("{key}.{k}"), v);
            }
        }
        other => out.push_str(&format!("{key},{}\n", scalar_str(other))),
    }
}

/// Reads a plain-text config file of `key=value` lines (# comments allowed)
/// into long-flag pairs.
pub fn load_config(path: &Path) -> std::io::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    Ok(out)
}

/// Splices config pairs right after the subcommand token so explicit
/// command-line flags override them (the parser lets later occurrences win).
pub fn merge_config_args(mut args: Vec<String>, pairs: &[(String, String)]) -> Vec<String> {
    // args[0] = program, args[1] = subcommand (clap requires this shape).
    let insert_at = 2.min(args.len());
    let mut injected = Vec::new();
    for (k, v) in pairs {
        injected.push(format!("--{k}"));
        injected.push(v.clone());
    }
    args.splice(insert_at..insert_at, injected);
    args
}
