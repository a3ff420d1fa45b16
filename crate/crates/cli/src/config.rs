//! JSON config overlays. A config file holds the same keys as the long
//! flags (with `_` for `-`); a previous report is accepted too, in which
//! case its `provenance.invocation` block is replayed.

use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub type Overlay = Map<String, Value>;

pub fn load_overlay(path: &Path) -> Result<Overlay, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?;
    let value = match value.pointer("/provenance/invocation") {
        Some(inv) => inv.clone(),
        None => value,
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::usage("config", format!("{}: expected a JSON object", path.display()))),
    }
}

/// Fills every unset field of `flags` from `file`. Keys the struct does not
/// know are rejected so typos do not silently fall back to defaults.
pub fn overlay<T: Serialize + DeserializeOwned>(flags: &T, file: &Overlay) -> Result<T, CliError> {
    let Value::Object(mut merged) = serde_json::to_value(flags).expect("options serialize") else {
        unreachable!("option structs serialize to objects")
    };
    for (k, v) in file {
        match merged.get_mut(k) {
            None => return Err(CliError::usage("config", format!("unknown config key `{k}`"))),
            Some(slot) if slot.is_null() => *slot = v.clone(),
            Some(_) => {}
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::usage("config", e.to_string()))
}
