//! `--config` support: a JSON object whose keys mirror the long flags.
//!
//! The object is expanded into flags inserted right after the subcommand
//! name, so any flag given explicitly on the command line comes later and
//! overrides it.

use serde_json::Value;
use std::ffi::OsString;

/// Global flags that take a value.
const GLOBAL_WITH_VALUE: [&str; 5] = ["--seed", "--threads", "--config", "--out", "--format"];

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Position of the subcommand name in `argv`.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if !s.starts_with('-') {
            return Some(i);
        }
        i += if !s.contains('=') && GLOBAL_WITH_VALUE.contains(&s.as_ref()) { 2 } else { 1 };
    }
    None
}

fn scalar(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(format!("unsupported config value {other}")),
    }
}

/// Flags equivalent to the config object.
pub fn to_flags(obj: &serde_json::Map<String, Value>) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (k, v) in obj {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(xs) => {
                let parts = xs.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(other)?.into());
            }
        }
    }
    Ok(out)
}

/// `argv` with the config file, if any, expanded in place.
pub fn merged_args(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let Value::Object(obj) = v else {
        return Err(format!("{}: config must be a JSON object", path.to_string_lossy()));
    };
    let flags = to_flags(&obj)?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let mut out = argv[..=at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}
