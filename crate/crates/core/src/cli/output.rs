//! Output files: CSV tables, JSON documents and the manifest sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::sweep::SweepRow;

pub const SWEEP_COLUMNS: [&str; 12] = [
    "channel",
    "param1_name",
    "param1",
    "param2_name",
    "param2",
    "gamma_star",
    "delta_g",
    "info_term",
    "lower_bound",
    "upper_bound",
    "direction",
    "diag",
];

pub const THRESHOLD_COLUMNS: [&str; 4] = [
    "scan_param",
    "omega_th_lower_bound",
    "omega_th_info_term",
    "diag",
];

/// Provenance record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub parameters: serde_json::Value,
    pub timestamp: String,
    pub rows: usize,
    pub failed_rows: usize,
    /// Number of rows carrying each diagnostic code.
    pub diagnostics: BTreeMap<String, usize>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, parameters: serde_json::Value) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            parameters,
            timestamp: timestamp(),
            rows: 0,
            failed_rows: 0,
            diagnostics: BTreeMap::new(),
        }
    }

    /// Tallies semicolon-separated diagnostic codes; `error: …` entries are
    /// counted as `error`.
    pub fn record<'a>(&mut self, diags: impl IntoIterator<Item = &'a str>) {
        for d in diags {
            self.rows += 1;
            if d.starts_with("error") {
                self.failed_rows += 1;
                *self.diagnostics.entry("error".into()).or_default() += 1;
                continue;
            }
            for code in d.split(';').filter(|c| !c.is_empty()) {
                *self.diagnostics.entry(code.to_string()).or_default() += 1;
            }
        }
    }
}

/// UTC timestamp, taken from `SOURCE_DATE_EPOCH` when set so that
/// manifests can be reproduced.
fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    now.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.channel.clone(),
            r.param1_name.clone(),
            fmt_f64(r.param1),
            r.param2_name.clone().unwrap_or_default(),
            fmt_opt(r.param2),
            fmt_opt(r.gamma_star),
            fmt_opt(r.delta_g),
            fmt_opt(r.info_term),
            fmt_opt(r.lower_bound),
            fmt_opt(r.upper_bound),
            r.direction.clone().unwrap_or_default(),
            r.diag.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub scan_param: f64,
    pub omega_th_lower_bound: Option<f64>,
    pub omega_th_info_term: Option<f64>,
    pub diag: String,
}

pub fn threshold_csv(rows: &[ThresholdRow]) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(THRESHOLD_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.scan_param),
            fmt_opt(r.omega_th_lower_bound),
            fmt_opt(r.omega_th_info_term),
            r.diag.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Debug, Serialize)]
pub struct Document<'a, T: Serialize> {
    pub manifest: &'a RunManifest,
    pub rows: &'a [T],
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes `bytes` to `out` and the manifest to its sidecar.
pub fn write_with_manifest(
    out: &Path,
    bytes: &[u8],
    manifest: &RunManifest,
) -> std::io::Result<()> {
    let mut f = fs::File::create(out)?;
    f.write_all(bytes)?;
    f.flush()?;
    let mut m = serde_json::to_vec_pretty(manifest)?;
    m.push(b'\n');
    fs::write(manifest_path(out), m)
}
