//! Small output helpers shared by the commands. All writers produce
//! deterministic bytes for a given value: JSON is pretty-printed with
//! struct field order, CSV cells use the shortest round-trip float form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Other(format!("serialize {name}: {e}")))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Formats one float cell; plain Display gives the shortest string that
/// parses back to the same value.
pub fn cell(value: f64) -> String {
    format!("{value}")
}

/// Comma inside a player's vector, semicolon between players.
pub fn join_profile(vectors: &[Vec<f64>]) -> String {
    vectors
        .iter()
        .map(|v| v.iter().map(|x| cell(*x)).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}
