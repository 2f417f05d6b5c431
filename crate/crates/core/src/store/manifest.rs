use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prompts::TemplateSlot;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Embeddings,
    Reducer,
    Subspace,
}

/// A file an artifact was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub path: String,
    pub digest: String,
}

impl SourceRef {
    pub fn of_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self { path: path.display().to_string(), digest: file_digest(path)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducerMeta {
    pub captured_variance_ratio: f64,
    pub retained_values: Vec<f64>,
    pub total_variance: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceMeta {
    pub k: usize,
    pub evr_threshold: f64,
    pub working_dim: usize,
    pub retained_values: Vec<f64>,
    pub total_variance: f64,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducer_digest: Option<String>,
}

/// JSON sidecar describing an NPY artifact. Serialized with keys in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactManifest {
    pub kind: ArtifactKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_slot: Option<TemplateSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_word: Option<String>,
    #[serde(default)]
    pub created_from: Vec<SourceRef>,
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducer: Option<ReducerMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<SubspaceMeta>,
}

impl ArtifactManifest {
    pub fn embeddings(dim: usize, created_from: Vec<SourceRef>) -> Self {
        Self {
            kind: ArtifactKind::Embeddings,
            dim,
            reduced_dim: None,
            concept_slot: None,
            concept_word: None,
            created_from,
            format_version: FORMAT_VERSION,
            reducer: None,
            subspace: None,
        }
    }

    /// Checks the kind-specific presence rules.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Integrity(format!("manifest: {why}")));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("format_version {} (expected {FORMAT_VERSION})", self.format_version));
        }
        let concept = self.concept_slot.is_some() || self.concept_word.is_some();
        match self.kind {
            ArtifactKind::Embeddings => {
                if self.reduced_dim.is_some() || concept || self.reducer.is_some() || self.subspace.is_some() {
                    return bad("embeddings manifests carry only dim and provenance".into());
                }
            }
            ArtifactKind::Reducer => {
                if self.reduced_dim.is_none() || self.reducer.is_none() {
                    return bad("reducer manifests need reduced_dim and reducer metadata".into());
                }
                if concept || self.subspace.is_some() {
                    return bad("reducer manifests carry no concept".into());
                }
            }
            ArtifactKind::Subspace => {
                if self.concept_slot.is_none() || self.concept_word.is_none() || self.subspace.is_none() {
                    return bad("subspace manifests need concept_slot, concept_word and subspace metadata".into());
                }
                if self.reducer.is_some() {
                    return bad("subspace manifests carry no reducer metadata".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, format!("bad manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationDraw {
    pub per_category: usize,
    pub seed: u64,
}

/// Sidecar for a prompt corpus text file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub kind: String,
    pub count: usize,
    pub wordlist_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_slot: Option<TemplateSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationDraw>,
    /// Set for corpora whose concept slot was rewritten to the concept word.
    #[serde(default)]
    pub replaced: bool,
    pub digest: String,
    pub format_version: u32,
}

impl CorpusManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// `cat.npy` → `cat.manifest.json`.
pub fn manifest_path(artifact: impl AsRef<Path>) -> PathBuf {
    artifact.as_ref().with_extension("manifest.json")
}

/// `sha256:<hex>` of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("sha256:{}", hex::encode(hasher.finalize())))
}

pub fn bytes_digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
