//! Image-set manifests.
//!
//! ```yaml
//! schema: 1
//! name: cwd
//! stages: [E2, E3, E4]
//! images:
//!   - id: frame_0001
//!     image: frames/0001.ppm        # optional
//!     tensors:
//!       E2: act/0001_e2.srgt
//!       E3: act/0001_e3.srgt
//!       E4: act/0001_e4.srgt
//! ```
//!
//! Paths are relative to the manifest's directory. An entry either lists a
//! tensor for every stage, or lists no tensors and names an image (such sets
//! can only be profiled with the reference encoder). JSON is accepted too.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::metric::StageId;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub tensors: IndexMap<StageId, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub name: String,
    pub stages: Vec<StageId>,
    pub images: Vec<ManifestEntry>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(name: impl Into<String>, stages: Vec<StageId>, images: Vec<ManifestEntry>) -> Self {
        Self {
            schema: MANIFEST_SCHEMA,
            name: name.into(),
            stages,
            images,
            base_dir: PathBuf::new(),
        }
    }

    /// Checks schema version, uniqueness and stage coverage.
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(FormatError::Manifest(format!(
                "unsupported schema {}, expected {MANIFEST_SCHEMA}",
                self.schema
            )));
        }
        if self.name.is_empty() {
            return Err(FormatError::Manifest("empty set name".into()));
        }
        if self.stages.is_empty() {
            return Err(FormatError::Manifest("no stages declared".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i].contains(s) {
                return Err(FormatError::Manifest(format!("stage {s} declared twice")));
            }
        }
        if self.images.is_empty() {
            return Err(FormatError::Manifest("no images listed".into()));
        }
        for (i, entry) in self.images.iter().enumerate() {
            if self.images[..i].iter().any(|e| e.id == entry.id) {
                return Err(FormatError::Manifest(format!("image id {:?} listed twice", entry.id)));
            }
            if let Some(stage) = entry.tensors.keys().find(|s| !self.stages.contains(s)) {
                return Err(FormatError::Manifest(format!(
                    "image {:?} lists undeclared stage {stage}",
                    entry.id
                )));
            }
            if entry.tensors.is_empty() && entry.image.is_some() {
                continue;
            }
            if let Some(stage) = self.stages.iter().find(|s| !entry.tensors.contains_key(*s)) {
                return Err(FormatError::MissingStage {
                    image: entry.id.clone(),
                    stage: stage.clone(),
                });
            }
        }
        Ok(())
    }

    /// True when every entry carries a tensor for every stage.
    pub fn has_tensors(&self) -> bool {
        self.images.iter().all(|e| !e.tensors.is_empty())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("manifest serializes")
    }
}

/// Parses and validates manifest text; `base_dir` anchors relative paths.
pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest, FormatError> {
    let mut m: Manifest = serde_yaml::from_str(text).map_err(|e| FormatError::Manifest(e.to_string()))?;
    m.base_dir = base_dir.into();
    m.validate()?;
    Ok(m)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, base)
}
