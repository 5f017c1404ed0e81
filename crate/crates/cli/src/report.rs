//! Report envelope, provenance, and file emission.
//!
//! Every JSON report shares the top-level schema
//! `{tool_version, command, provenance, payload}`. Writes are atomic
//! (write to a temp sibling, then rename), and all float rendering is
//! shortest-roundtrip, so re-running a command with identical inputs,
//! flags, and seed produces byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use aol_core::metrics::MetricTable;

use crate::{CliError, TOOL_VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub args: BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
pub struct Report<P: Serialize> {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub provenance: Provenance,
    pub payload: P,
}

impl<P: Serialize> Report<P> {
    pub fn new(command: &'static str, provenance: Provenance, payload: P) -> Self {
        Report {
            tool_version: TOOL_VERSION,
            command,
            provenance,
            payload,
        }
    }
}

pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = tmp_sibling(path);
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn write_json_report<P: Serialize>(path: &Path, report: &Report<P>) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

/// Probit-scale scatter CSV: an `x,y` header then one row per point,
/// shortest-roundtrip decimals.
pub fn write_scatter_csv(path: &Path, points: &[(f64, f64)]) -> Result<(), CliError> {
    let mut text = String::from("x,y\n");
    for (x, y) in points {
        text.push_str(&format!("{x},{y}\n"));
    }
    write_atomic(path, text.as_bytes())
}

/// Reads a metric table from either a bare table JSON or a report
/// envelope whose payload is a table.
pub fn read_metric_table(path: &Path) -> Result<MetricTable, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let json_err = |source| CliError::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(json_err)?;
    let table_value = match value.get("payload") {
        Some(payload) if payload.get("split").is_some() => payload.clone(),
        _ => value,
    };
    let table: MetricTable = serde_json::from_value(table_value).map_err(json_err)?;
    Ok(table)
}
