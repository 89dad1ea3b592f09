//! JSON config files whose keys mirror the long flags.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

/// Value of `--config` in `argv`, if present.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn given(argv: &[OsString], flag: &str) -> bool {
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items.iter().map(|i| scalar(key, i)).collect::<Result<Vec<_>>>()?.join(","),
        Value::Null | Value::Object(_) => bail!("config key {key:?} must be a string, number, boolean or list"),
    })
}

/// Appends `--key value` for every config key not already given as a flag.
pub fn merge(argv: Vec<OsString>, config: &Map<String, Value>) -> Result<Vec<OsString>> {
    let mut out = argv.clone();
    for (key, value) in config {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || given(&argv, &flag) {
            continue;
        }
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) => {}
            v => out.push(format!("{flag}={}", scalar(key, v)?).into()),
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(map) => Ok(map),
        _ => bail!("config {} must hold a JSON object", path.display()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(xs: &[&str]) -> Vec<OsString> {
        xs.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_override_config() {
        let config: Map<String, Value> =
            serde_json::from_str(r#"{"seed": 5, "replicas": 100, "x0": [0, -1], "drift_transform": true}"#).unwrap();
        let merged = merge(args(&["sf", "chain", "simulate", "--seed", "9"]), &config).unwrap();
        let tail: Vec<String> = merged[5..].iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert!(tail.contains(&"--replicas=100".to_string()));
        assert!(tail.contains(&"--x0=0,-1".to_string()));
        assert!(tail.contains(&"--drift-transform".to_string()));
        assert!(!tail.iter().any(|s| s.starts_with("--seed")));
    }

    #[test]
    fn config_flag_is_found() {
        assert_eq!(config_path(&args(&["sf", "--config", "a.json"])), Some("a.json".into()));
        assert_eq!(config_path(&args(&["sf", "--config=b.json"])), Some("b.json".into()));
        assert_eq!(config_path(&args(&["sf", "params"])), None);
    }
}
