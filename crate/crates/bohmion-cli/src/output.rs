//! Deterministic artifact writers.
//!
//! All floats are written with Rust's shortest round-trip formatting, so a
//! bitwise-identical state always serializes to identical bytes; JSON object
//! layouts are fixed by struct field order. `manifest.json` is written last
//! and references every other emitted file.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Conventions;

/// Output directory with artifact bookkeeping.
pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, String> {
        fs::create_dir_all(root)
            .map_err(|e| format!("cannot create output directory {}: {e}", root.display()))?;
        Ok(RunDir { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    /// Register `name` as an artifact and return its full path.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.root.join(name)
    }

    pub fn csv(&mut self, name: &str, columns: &[String]) -> Result<CsvFile, String> {
        let path = self.artifact(name);
        CsvFile::create(&path, columns)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), String> {
        let path = self.artifact(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| format!("cannot serialize {name}: {e}"))?;
        fs::write(&path, text + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    /// Write `manifest.json` (never listed among its own artifacts).
    pub fn finish(mut self, manifest: &mut Manifest) -> Result<(), String> {
        self.artifacts.sort();
        manifest.artifacts = std::mem::take(&mut self.artifacts);
        let text = serde_json::to_string_pretty(manifest)
            .map_err(|e| format!("cannot serialize manifest: {e}"))?;
        let path = self.root.join("manifest.json");
        fs::write(&path, text + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}

/// Buffered CSV writer: a `#`-prefixed schema comment, a header row, then
/// shortest-round-trip float rows.
pub struct CsvFile {
    out: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl CsvFile {
    fn create(path: &Path, columns: &[String]) -> Result<Self, String> {
        let file = File::create(path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        let mut csv = CsvFile {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            columns: columns.len(),
        };
        csv.line(&format!("# columns: {}", columns.join(", ")))?;
        csv.line(&columns.join(","))?;
        Ok(csv)
    }

    fn line(&mut self, text: &str) -> Result<(), String> {
        writeln!(self.out, "{text}")
            .map_err(|e| format!("cannot write {}: {e}", self.path.display()))
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), String> {
        debug_assert_eq!(values.len(), self.columns);
        let mut text = String::with_capacity(values.len() * 8);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&fmt_f64(*v));
        }
        self.line(&text)
    }

    /// Row of already-formatted cells (for mixed string/number tables).
    pub fn text_row(&mut self, cells: &[String]) -> Result<(), String> {
        debug_assert_eq!(cells.len(), self.columns);
        self.line(&cells.join(","))
    }

    pub fn finish(mut self) -> Result<(), String> {
        self.out
            .flush()
            .map_err(|e| format!("cannot flush {}: {e}", self.path.display()))
    }
}

/// Shortest round-trip decimal form of a float (`Display` for finite f64).
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // fold -0.0 into 0 so algebraically-zero columns are stable
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Conventions as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ConventionRecord {
    pub rho_trace: String,
    pub gradient_scope: String,
    pub quantum_term: bool,
}

impl From<&Conventions> for ConventionRecord {
    fn from(c: &Conventions) -> Self {
        ConventionRecord {
            rho_trace: match c.rho_trace {
                bohmion_core::kernels::RhoTrace::Weight => "weight".to_string(),
                bohmion_core::kernels::RhoTrace::Unit => "unit".to_string(),
            },
            gradient_scope: c.gradient_scope.name().to_string(),
            quantum_term: c.quantum_term,
        }
    }
}

/// Run record written as `manifest.json`. Deliberately excludes wall-clock
/// data so two identical runs produce identical bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub code_version: &'static str,
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub conventions: ConventionRecord,
    /// Conserved-quantity drift statistics measured over the run's samples
    /// (empty for kinds without propagation).
    pub drift: BTreeMap<String, f64>,
    pub aborted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_good_snapshot: Option<String>,
    /// Verification tallies (verify runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks_failed: Option<usize>,
    /// Sections present in the config that this scenario kind does not read.
    pub unused_sections: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(
        scenario: &str,
        config_sha256: String,
        seed: u64,
        threads: usize,
        conventions: ConventionRecord,
        unused_sections: Vec<String>,
    ) -> Self {
        Manifest {
            schema: 1,
            code_version: env!("CARGO_PKG_VERSION"),
            scenario: scenario.to_string(),
            config_sha256,
            seed,
            threads,
            conventions,
            drift: BTreeMap::new(),
            aborted: false,
            abort_message: None,
            last_good_snapshot: None,
            checks_total: None,
            checks_failed: None,
            unused_sections,
            artifacts: Vec::new(),
        }
    }
}
