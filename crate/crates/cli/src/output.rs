//! CSV writing and sidecar run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::CliResult;

/// Full round-trip precision: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub tool_version: String,
    /// UTC, ISO-8601.
    pub timestamp: String,
    pub data_file: String,
    pub fallbacks_used: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, params: &impl Serialize, seed: u64) -> Self {
        let parameters = match serde_json::to_value(params) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        RunManifest {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            data_file: String::new(),
            fallbacks_used: Vec::new(),
        }
    }
}

/// `<dir>/<stem>.manifest.json` for a data file.
pub fn manifest_path(data: &Path) -> PathBuf {
    let stem = data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    data.with_file_name(format!("{stem}.manifest.json"))
}

/// Writes `rows` under `header` to `out` (stdout when `None`). With a file
/// target, the manifest goes next to it.
pub fn emit_csv(
    out: Option<&Path>,
    header: &[&str],
    rows: &[Vec<String>],
    mut manifest: RunManifest,
) -> CliResult<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    match out {
        None => std::io::stdout().write_all(&buf)?,
        Some(path) => {
            std::fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
            manifest.data_file = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mpath = manifest_path(path);
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            std::fs::write(&mpath, json + "\n")
                .with_context(|| format!("writing {}", mpath.display()))?;
        }
    }
    Ok(())
}
