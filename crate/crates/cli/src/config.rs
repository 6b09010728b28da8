//! Run configuration: a TOML file with `[experiment]` and `[prep]`
//! sections, plus `--set key=value` overrides that win over the file.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mothnet_core::experiments::data::PrepOptions;
use mothnet_core::experiments::ExperimentConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub prep: PrepOptions,
}

const SECTIONS: [&str; 2] = ["experiment", "prep"];

/// Reads `path` (defaults when absent) and applies `overrides`. Keys
/// without a section prefix refer to `[experiment]`.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ConfigFile> {
    let (text, origin) = match path {
        Some(p) => (
            std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    // parse the file on its own first so schema errors carry line numbers
    let parsed: ConfigFile = toml::from_str(&text).map_err(|e| anyhow!("{origin}: {e}"))?;
    if overrides.is_empty() {
        return Ok(parsed);
    }
    let mut table: Table = text.parse().map_err(|e| anyhow!("{origin}: {e}"))?;
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    ConfigFile::deserialize(Value::Table(table)).map_err(|e| anyhow!("after --set overrides: {e}"))
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let mut path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override `{spec}` has an empty key segment");
    }
    if !SECTIONS.contains(&path[0]) {
        path.insert(0, "experiment");
    }
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{spec}`: `{p}` is not a section"))?;
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}
