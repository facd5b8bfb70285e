//! Provenance records written next to every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{data, CliError, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";
/// Suffix of the manifest written beside a single output file.
pub const FILE_MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Non-path options, rendered as strings.
    pub parameters: BTreeMap<String, String>,
    pub config_hash: Option<String>,
    /// Input file to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    /// Unix seconds. `SOURCE_DATE_EPOCH` overrides the clock.
    pub started_at: u64,
    pub finished_at: u64,
    /// Output path relative to the manifest's directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

/// All regular files under `dir`, sorted, excluding manifests.
pub fn walk(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if !is_manifest(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn is_manifest(path: &Path) -> bool {
    path.file_name()
        .map(|n| n.to_string_lossy())
        .is_some_and(|n| n == MANIFEST_FILE || n.ends_with(FILE_MANIFEST_SUFFIX))
}

fn rel(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        let t = now();
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            config_hash: None,
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: t,
            finished_at: t,
            outputs: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    /// Records an input file, keyed by its path relative to `base`.
    pub fn input(&mut self, path: &Path, base: &Path) -> Result<&mut Self> {
        self.inputs.insert(rel(path, base), sha256_file(path)?);
        Ok(self)
    }

    /// Hashes every output under `dir` and writes the manifest there.
    pub fn finish_dir(mut self, dir: &Path) -> Result<PathBuf> {
        for p in walk(dir)? {
            self.outputs.insert(rel(&p, dir), sha256_file(&p)?);
        }
        self.write(dir)
    }

    /// Hashes one output file and writes `<file>.manifest.json` beside it.
    pub fn finish_file(mut self, file: &Path) -> Result<PathBuf> {
        let dir = file.parent().unwrap_or(Path::new("."));
        self.outputs.insert(rel(file, dir), sha256_file(file)?);
        let name = format!("{}{FILE_MANIFEST_SUFFIX}", file.file_name().unwrap_or_default().to_string_lossy());
        self.write_to(&dir.join(name))
    }

    fn write(self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        self.write_to(&dir.join(MANIFEST_FILE))
    }

    fn write_to(mut self, path: &Path) -> Result<PathBuf> {
        self.finished_at = now().max(self.started_at);
        fs::write(path, serde_json::to_vec_pretty(&self)?)?;
        Ok(path.to_path_buf())
    }

    pub fn read(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(path)?)?))
    }
}

/// Checks `file` against the manifest in `dir`, if there is one that lists it.
pub fn verify(dir: &Path, file: &Path) -> Result<()> {
    let Some(m) = RunManifest::read(dir)? else { return Ok(()) };
    let key = rel(file, dir);
    match m.outputs.get(&key) {
        Some(expected) => {
            let got = sha256_file(file)?;
            if &got != expected {
                return Err(CliError::Incompatible(format!(
                    "hash mismatch for {key}: manifest {expected}, file {got}"
                )));
            }
            Ok(())
        }
        None => Ok(()),
    }
}
