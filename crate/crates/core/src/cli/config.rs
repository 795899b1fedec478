//! Strict JSON configuration with flag overrides.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use super::manifest::RunManifest;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Read a config object for `command`. A run manifest is accepted too, in which case its
/// config snapshot is used, so a manifest alone reproduces its run.
pub fn read_config_object(path: &Path, command: &str) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let mut obj = match value {
        Value::Object(m) => m,
        _ => return Err(Error::config("config", "expected a JSON object")),
    };
    if obj.contains_key("manifest_version") {
        let m: RunManifest = parse_value(Value::Object(obj), "")?;
        if m.command != command {
            return Err(Error::config(
                "command",
                format!("manifest records `{}`, not `{command}`", m.command),
            ));
        }
        obj = match m.config {
            Value::Object(c) => c,
            _ => return Err(Error::config("config", "manifest config is not an object")),
        };
    }
    if let Some(v) = obj.remove("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(Error::config("schema_version", format!("unsupported version {v}; expected {SCHEMA_VERSION}")));
        }
    }
    Ok(obj)
}

/// Deserialize with the dotted key path of the first offending entry in errors.
pub fn parse_value<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let key = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        Error::config(key, e.into_inner().to_string())
    })
}

/// Take `key` out of a config object, if present.
pub fn take<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => parse_value(v, key).map(Some),
    }
}

/// A count flag given as a signed integer, checked to be at least `min`.
pub fn count(key: &str, value: i64, min: i64) -> Result<usize> {
    if value < min {
        return Err(Error::config(key, format!("must be at least {min}, got {value}")));
    }
    Ok(value as usize)
}

pub fn required<T>(key: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| Error::config(key, "missing required key"))
}

/// Comma-separated list flag.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
}

pub fn parse_indices(key: &str, s: &str) -> Result<Vec<usize>> {
    split_list(s)
        .iter()
        .map(|p| p.parse().map_err(|_| Error::config(key, format!("`{p}` is not an index"))))
        .collect()
}

pub fn parse_floats(key: &str, s: &str) -> Result<Vec<f64>> {
    split_list(s)
        .iter()
        .map(|p| p.parse().map_err(|_| Error::config(key, format!("`{p}` is not a number"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        #[allow(dead_code)]
        lr: f64,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Outer {
        #[allow(dead_code)]
        train: Inner,
    }

    #[test]
    fn errors_name_the_key_path() {
        let v: Value = serde_json::from_str(r#"{"train": {"lr": "fast"}}"#).unwrap();
        match parse_value::<Outer>(v, "").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "train.lr"),
            e => panic!("{e}"),
        }
        let v: Value = serde_json::from_str(r#"{"train": {"lr": 1, "extra": 2}}"#).unwrap();
        assert!(matches!(parse_value::<Outer>(v, "").unwrap_err(), Error::Config { .. }));
    }

    #[test]
    fn negative_counts_name_the_flag() {
        match count("draws", -1, 1).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "draws"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn schema_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"schema_version": 2}"#).unwrap();
        assert!(read_config_object(&p, "bench").is_err());
        fs::write(&p, r#"{"schema_version": 1, "draws": 3}"#).unwrap();
        assert_eq!(read_config_object(&p, "bench").unwrap().len(), 1);
    }
}
