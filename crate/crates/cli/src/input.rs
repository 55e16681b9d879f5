//! Path checks and JSON loading.

use std::path::Path;

use anyhow::{Context, Result};
use missmass::Observation;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::usage;

pub fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

pub fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(usage(format!("output directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(usage(format!("output path {} is a directory", path.display())));
    }
    Ok(())
}

/// Parses a JSON file; syntax errors carry line and column.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

pub fn parse<T: DeserializeOwned>(value: &Value, what: &str, path: &Path) -> Result<T> {
    T::deserialize(value).with_context(|| format!("{what} in {}", path.display()))
}

/// An observation file; extra top-level keys (such as the full counts of a
/// simulated dataset, or a mixture block) are kept in the returned value.
pub fn load_observation(path: &Path) -> Result<(Observation, Value)> {
    let value = read_json(path)?;
    let obs = parse(&value, "invalid observation", path)?;
    Ok((obs, value))
}
