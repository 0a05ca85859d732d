//! Result rows, CSV rendering and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::channel::Antennas;
use crate::error::Result;

pub const SCHEMA_LINE: &str = "# fjsim results schema v1";
pub const HEADER: &str = "experiment,scheme,metric,snr_db,nt,nr,ne,param_name,param_value,value,std_error,count,value_bits";

/// One line of `results.csv`. Rates are in nats; `value_bits` is filled for
/// rate metrics only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub scheme: String,
    pub metric: String,
    pub snr_db: Option<f64>,
    pub antennas: Antennas,
    pub param: Option<(String, f64)>,
    pub value: f64,
    pub std_error: Option<f64>,
    pub count: u64,
    pub is_rate: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let (pn, pv) = match &self.param {
            Some((n, v)) => (n.clone(), v.to_string()),
            None => (String::new(), String::new()),
        };
        let bits = if self.is_rate { crate::linalg::nats_to_bits(self.value).to_string() } else { String::new() };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.scheme,
            self.metric,
            opt(self.snr_db),
            self.antennas.nt,
            self.antennas.nr,
            self.antennas.ne,
            pn,
            pv,
            self.value,
            opt(self.std_error),
            self.count,
            bits
        )
    }
}

pub fn render_results(rows: &[ResultRow]) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Free-form training trace written as `history.csv`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl History {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }
}

/// SHA-256 over `blob <len>\0<content>`, the git object framing.
pub fn blob_digest(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub command: String,
    pub config: ExperimentConfig,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputDigest>,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Writes `files` into `dir`; on any failure removes what was written.
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<Vec<OutputDigest>> {
    let mut written: Vec<PathBuf> = Vec::new();
    let mut digests = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, content) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(e.into());
        }
        written.push(path);
        digests.push(OutputDigest {
            file: name.to_string(),
            sha256: blob_digest(content.as_bytes()),
            bytes: content.len(),
        });
    }
    Ok(digests)
}
