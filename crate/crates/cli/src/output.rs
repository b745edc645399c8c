//! Artifact persistence: results, tables, path files, manifest and timing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Version of the results/manifest layout.
pub const FORMAT_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => ryu::Buffer::new().format(*v).to_string(),
            Cell::U(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// A file destined for `tables/` or `paths/`.
#[derive(Debug, Clone)]
pub struct Blob {
    pub name: String,
    pub bytes: Vec<u8>,
    /// False for files carrying wall-clock data.
    pub deterministic: bool,
}

pub fn csv_table(name: &str, header: &[&str], rows: &[Vec<Cell>], deterministic: bool) -> Blob {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).expect("in-memory csv");
    }
    Blob {
        name: name.to_string(),
        bytes: w.into_inner().expect("in-memory csv"),
        deterministic,
    }
}

#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub results: Value,
    pub tables: Vec<Blob>,
    pub paths: Vec<Blob>,
    pub timing: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub tool_version: String,
    pub command: String,
    pub seed_base: u64,
    pub config_hash: String,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub seed_base: u64,
    pub config_hash: String,
    pub write_json: bool,
    pub write_csv: bool,
}

fn put(dir: &Path, rel: &str, bytes: &[u8], deterministic: bool, files: &mut Vec<ManifestEntry>) -> std::io::Result<()> {
    let full = dir.join(rel);
    if let Some(parent) = full.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&full, bytes)?;
    files.push(ManifestEntry {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
        deterministic,
    });
    Ok(())
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("json values serialize");
    b.push(b'\n');
    b
}

/// Writes every artifact under `dir` and returns the manifest (also written).
pub fn write_run(dir: &Path, info: &RunInfo<'_>, art: &Artifacts) -> std::io::Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if info.write_json {
        let doc = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "command": info.command,
            "tool_version": TOOL_VERSION,
            "seed_base": info.seed_base,
            "config_hash": info.config_hash,
            "results": art.results,
        });
        put(dir, "results.json", &json_bytes(&doc), true, &mut files)?;
    }
    if info.write_csv {
        for t in &art.tables {
            put(dir, &format!("tables/{}", t.name), &t.bytes, t.deterministic, &mut files)?;
        }
    }
    for p in &art.paths {
        put(dir, &format!("paths/{}", p.name), &p.bytes, p.deterministic, &mut files)?;
    }
    put(dir, "timing.json", &json_bytes(&art.timing), false, &mut files)?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        format_version: FORMAT_VERSION.into(),
        tool_version: TOOL_VERSION.into(),
        command: info.command.into(),
        seed_base: info.seed_base,
        config_hash: info.config_hash.clone(),
        files,
    };
    let bytes = json_bytes(&serde_json::to_value(&manifest).expect("manifest serializes"));
    fs::write(dir.join("manifest.json"), bytes)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, String> {
    let p = dir.join("manifest.json");
    let text = fs::read_to_string(&p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("malformed {}: {e}", p.display()))
}

/// Files whose on-disk content no longer matches the manifest.
pub fn stale_files(dir: &Path, manifest: &Manifest) -> Vec<String> {
    manifest
        .files
        .iter()
        .filter(|f| match fs::read(dir.join(&f.path)) {
            Ok(b) => sha256_hex(&b) != f.sha256,
            Err(_) => true,
        })
        .map(|f| f.path.clone())
        .collect()
}

/// Deterministic files that differ between two manifests.
pub fn deterministic_mismatches(old: &Manifest, new: &Manifest) -> Vec<String> {
    let mut out = Vec::new();
    for f in old.files.iter().filter(|f| f.deterministic) {
        match new.files.iter().find(|g| g.path == f.path) {
            Some(g) if g.sha256 == f.sha256 => {}
            _ => out.push(f.path.clone()),
        }
    }
    for g in new.files.iter().filter(|g| g.deterministic) {
        if !old.files.iter().any(|f| f.path == g.path) {
            out.push(g.path.clone());
        }
    }
    out
}

pub fn scratch_dir(tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    std::env::temp_dir().join(format!("slowfast-{tag}-{}-{nanos}", std::process::id()))
}
