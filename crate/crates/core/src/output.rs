//! Run directories: CSV and JSON data files, `summary.txt` and the run
//! manifest.
//!
//! Nothing is written outside the run directory. Timestamps honour
//! `SOURCE_DATE_EPOCH`, so with it set a rerun is byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coincidence::ScanResult;
use crate::detection::SnrScaling;
use crate::error::{Error, Result};
use crate::scenarios::{Fig2Result, Fig3Result, Fig3TraceResult, MatrixResult};
use crate::state::{ModeLabel, Photon};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: RunStatus,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    /// Verbatim config text.
    pub config_snapshot: Option<String>,
    pub seed: Option<u64>,
    /// Command-line overrides applied on top of the config file.
    #[serde(default)]
    pub overrides: Vec<String>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputFile>,
    pub results: serde_json::Value,
    pub error: Option<ErrorRecord>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "ququad".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: RunStatus::Ok,
            config_path: None,
            config_sha256: None,
            config_snapshot: None,
            seed: None,
            overrides: Vec::new(),
            started_unix_s: timestamp(),
            finished_unix_s: 0,
            warnings: Vec::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
            error: None,
        }
    }

    pub fn with_config(mut self, path: &Path, bytes: &[u8]) -> Self {
        self.config_path = Some(path.display().to_string());
        self.config_sha256 = Some(sha256_hex(bytes));
        self.config_snapshot = Some(String::from_utf8_lossy(bytes).into_owned());
        self
    }

    pub fn fail(&mut self, kind: &str, message: impl Into<String>) {
        self.status = RunStatus::Failed;
        self.error = Some(ErrorRecord { kind: kind.into(), message: message.into() });
    }

    /// True when the embedded snapshot hashes to the recorded digest.
    pub fn snapshot_matches(&self) -> bool {
        match (&self.config_snapshot, &self.config_sha256) {
            (Some(s), Some(h)) => sha256_hex(s.as_bytes()) == *h,
            _ => false,
        }
    }
}

/// A run directory accumulating output files.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(RunDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `name` (a bare file name) inside the run directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(Error::param("file name", format!("{name:?} is not a bare file name")));
        }
        let p = self.root.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
        self.files.retain(|f| f.name != name);
        self.files.push(OutputFile { name: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Records the inventory and writes `manifest.json`.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = self.files.clone();
        manifest.finished_unix_s = timestamp();
        let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        let p = self.root.join("manifest.json");
        std::fs::write(&p, s).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
        Ok(manifest)
    }
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct ScanRow {
    delta_m: f64,
    #[serde(rename = "P_raw")]
    p_raw: f64,
    #[serde(rename = "P_envelope_max")]
    p_envelope_max: f64,
    #[serde(rename = "P_envelope_min")]
    p_envelope_min: f64,
}

/// Columns `delta_m, P_raw, P_envelope_max, P_envelope_min`.
pub fn scan_csv(scan: &ScanResult) -> Result<Vec<u8>> {
    csv_bytes(scan.points.iter().map(|p| ScanRow {
        delta_m: p.delta_m,
        p_raw: p.p_raw,
        p_envelope_max: p.p_envelope_max,
        p_envelope_min: p.p_envelope_min,
    }))
}

#[derive(Serialize)]
struct TraceRow {
    acquisition: usize,
    phase_rad: f64,
    expected_coinc_hz: f64,
    singles_a: u64,
    singles_b: u64,
    true_coinc: u64,
    accidental_coinc: u64,
    total_coinc: u64,
    seed: u64,
}

/// One row per acquisition.
pub fn trace_csv(t: &Fig3TraceResult) -> Result<Vec<u8>> {
    csv_bytes(t.acquisitions.iter().map(|a| TraceRow {
        acquisition: a.index,
        phase_rad: a.phase_rad,
        expected_coinc_hz: a.expected.total_coinc_hz(),
        singles_a: a.counts.singles_a,
        singles_b: a.counts.singles_b,
        true_coinc: a.counts.true_coinc,
        accidental_coinc: a.counts.accidental_coinc,
        total_coinc: a.counts.total_coinc(),
        seed: a.counts.seed,
    }))
}

#[derive(Serialize)]
struct MatrixRow {
    mode_a: String,
    mode_b: String,
    total_coinc: u64,
    true_coinc: u64,
    accidental_coinc: u64,
    corrected: f64,
    seed: u64,
}

/// One row per detector pair, labelled by the 1-based path index of each side.
pub fn matrix_csv(m: &MatrixResult) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (i, row) in m.counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            rows.push(MatrixRow {
                mode_a: ModeLabel::from_index(Photon::A, i + 1)?.to_string(),
                mode_b: ModeLabel::from_index(Photon::B, j + 1)?.to_string(),
                total_coinc: c.total_coinc(),
                true_coinc: c.true_coinc,
                accidental_coinc: c.accidental_coinc,
                corrected: m.corrected[i][j],
                seed: c.seed,
            });
        }
    }
    csv_bytes(rows)
}

pub fn snr_csv(s: &SnrScaling) -> Result<Vec<u8>> {
    csv_bytes(s.rows.iter())
}

pub fn fig2_summary(r: &Fig2Result) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scan {} ({}), {} points", r.variant, r.scan.variable, r.scan.points.len());
    let _ = writeln!(s, "{:<28}{}", "fwhm_m", r.fwhm_m);
    let _ = writeln!(s, "{:<28}{}", "visibility_at_zero", r.visibility.value);
    let max_dev = r.scan.points.iter().map(|p| (p.total - 1.0).abs()).fold(0.0, f64::max);
    let _ = writeln!(s, "{:<28}{}", "max_normalization_error", max_dev);
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn fig3_summary(r: &Fig3Result) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10}{:>12}{:>12}{:>14}{:>14}{:>12}{:>12}", "trace", "raw_max", "raw_min", "fit_upper", "V_fringe", "V_fit", "expected_V");
    for t in &r.traces {
        let _ = writeln!(
            s,
            "{:<10}{:>12}{:>12}{:>14.2}{:>14.4}{:>12.4}{:>12.4}",
            t.trace.name(),
            t.raw_max,
            t.raw_min,
            t.fit.upper(),
            t.visibility_fringe.value,
            t.visibility_fit.value,
            t.levels.visibility()
        );
    }
    let _ = writeln!(s, "enhancement (fitted envelopes) {} ± {}", r.enhancement.value, r.enhancement.uncertainty);
    let _ = writeln!(s, "enhancement (raw maxima)       {} ± {}", r.enhancement_raw.value, r.enhancement_raw.uncertainty);
    s
}

pub fn matrix_summary(m: &MatrixResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6}{:<6}{:>14}{:>14}", "i", "j", "V0", "sigma");
    for v in &m.visibilities {
        let _ = writeln!(s, "{:<6}{:<6}{:>14.5}{:>14.5}", v.i + 1, v.j + 1, v.visibility.value, v.visibility.uncertainty);
    }
    let _ = writeln!(s, "V_zz (mean) {} ± {}", m.v_zz.value, m.v_zz.uncertainty);
    for w in &m.witnesses {
        let verdict = if w.report.certified { "entangled" } else { "not certified" };
        let _ = writeln!(s, "W with V_xx from {}: {} ± {} ({verdict})", w.v_xx_source, w.report.value, w.report.uncertainty);
    }
    s
}

pub fn snr_summary(r: &SnrScaling) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8}{:>16}{:>16}{:>12}", "n_pairs", "true_hz", "accidental_hz", "ratio");
    for row in &r.rows {
        let _ = writeln!(s, "{:>8}{:>16.3}{:>16.3}{:>12.3}", row.n_pairs, row.true_hz, row.accidental_hz, row.ratio);
    }
    let _ = writeln!(s, "slopes: true {} accidental {}", r.true_slope, r.accidental_slope);
    s
}
