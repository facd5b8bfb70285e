//! Checkpoint format: `manifest.json` plus `weights.bin`.
//!
//! The blob holds every tensor listed in the manifest, in manifest order, as
//! little-endian 32-bit floats with no padding.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AutodiffError, Result};
use crate::params::ParamStore;
use crate::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "weights.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Parameter,
    Buffer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: TensorKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub dtype: String,
    pub config_hash: String,
    pub tensors: Vec<TensorEntry>,
    /// Free-form data owned by the caller (model config, vocabulary, ...).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// A checkpoint held in memory.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub tensors: Vec<Tensor<f32>>,
}

impl Checkpoint {
    /// Collects all parameters of `store` followed by `buffers`.
    pub fn from_store(
        store: &ParamStore<f32>,
        buffers: &[(String, Tensor<f32>)],
        config_hash: impl Into<String>,
        metadata: serde_json::Value,
    ) -> Self {
        let mut entries = Vec::new();
        let mut tensors = Vec::new();
        for (_, p) in store.iter() {
            entries.push(TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                kind: TensorKind::Parameter,
            });
            tensors.push(p.value.clone());
        }
        for (name, t) in buffers {
            entries.push(TensorEntry { name: name.clone(), shape: t.shape().to_vec(), kind: TensorKind::Buffer });
            tensors.push(t.clone());
        }
        let manifest = CheckpointManifest {
            format_version: FORMAT_VERSION,
            dtype: "f32".into(),
            config_hash: config_hash.into(),
            tensors: entries,
            metadata,
        };
        Self { manifest, tensors }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut blob = Vec::with_capacity(self.tensors.iter().map(|t| t.numel() * 4).sum());
        for t in &self.tensors {
            for v in t.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_atomic(&dir.join(BLOB_FILE), &blob)?;
        let json = serde_json::to_vec_pretty(&self.manifest)?;
        write_atomic(&dir.join(MANIFEST_FILE), &json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(AutodiffError::Format(format!("unsupported format version {}", manifest.format_version)));
        }
        if manifest.dtype != "f32" {
            return Err(AutodiffError::Format(format!("unsupported dtype {}", manifest.dtype)));
        }
        let blob = fs::read(dir.join(BLOB_FILE))?;
        let expected: usize = manifest.tensors.iter().map(|e| e.shape.iter().product::<usize>() * 4).sum();
        if blob.len() != expected {
            return Err(AutodiffError::Format(format!("blob has {} bytes, manifest needs {expected}", blob.len())));
        }
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        let mut offset = 0;
        for e in &manifest.tensors {
            let n: usize = e.shape.iter().product();
            let data = blob[offset..offset + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            offset += 4 * n;
            tensors.push(Tensor::from_vec(&e.shape, data)?);
        }
        Ok(Self { manifest, tensors })
    }

    /// Copies parameters into `store` after checking the config hash and
    /// that names and shapes line up exactly.
    pub fn restore_params(&self, store: &mut ParamStore<f32>, config_hash: &str) -> Result<()> {
        if self.manifest.config_hash != config_hash {
            return Err(AutodiffError::Incompatible(format!(
                "config hash {} does not match model {config_hash}",
                self.manifest.config_hash
            )));
        }
        let params: Vec<(&TensorEntry, &Tensor<f32>)> =
            self.entries().filter(|(e, _)| e.kind == TensorKind::Parameter).collect();
        if params.len() != store.len() {
            return Err(AutodiffError::Incompatible(format!(
                "checkpoint has {} parameters, model has {}",
                params.len(),
                store.len()
            )));
        }
        for (e, t) in params {
            let p = store
                .by_name_mut(&e.name)
                .map_err(|_| AutodiffError::Incompatible(format!("unexpected parameter {}", e.name)))?;
            if p.value.shape() != t.shape() {
                return Err(AutodiffError::Incompatible(format!(
                    "{}: shape {:?} vs model {:?}",
                    e.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }

    pub fn buffer(&self, name: &str) -> Option<&Tensor<f32>> {
        self.entries().find(|(e, _)| e.kind == TensorKind::Buffer && e.name == name).map(|(_, t)| t)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TensorEntry, &Tensor<f32>)> {
        self.manifest.tensors.iter().zip(&self.tensors)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}
