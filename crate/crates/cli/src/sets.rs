//! Turning a set argument into a profile.
//!
//! A set argument names one of
//! - a cached profile (JSON written by `attngap profile`),
//! - a manifest file (YAML or JSON),
//! - a directory holding `manifest.yaml`, or else PGM/PPM images.

use std::fs;
use std::path::{Path, PathBuf};

use attngap::encoder::encode;
use attngap::io::{load_manifest, parse_manifest, read_image, read_srgt, Manifest};
use attngap::metric::{build_profile, ImageSetProfile, StageId, StageSample, TargetSize};
use attngap::RgbImage;
use serde::{Deserialize, Serialize};

use crate::{CliError, EncoderMode, ErrorKind, RunConfig};

/// Value of the `kind` field that marks a cached profile.
pub const PROFILE_KIND: &str = "profile";
const PROFILE_SCHEMA: u32 = 1;
const MANIFEST_NAMES: [&str; 3] = ["manifest.yaml", "manifest.yml", "manifest.json"];

#[derive(Serialize, Deserialize)]
struct CachedProfile {
    kind: String,
    schema: u32,
    #[serde(flatten)]
    profile: ImageSetProfile,
}

pub fn profile_to_json(p: &ImageSetProfile) -> Vec<u8> {
    let doc = CachedProfile {
        kind: PROFILE_KIND.into(),
        schema: PROFILE_SCHEMA,
        profile: p.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("profile serializes");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone)]
pub enum SetSource {
    Profile(ImageSetProfile),
    Manifest(Manifest),
    Images { name: String, files: Vec<PathBuf> },
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(ErrorKind::Io, format!("{}: {e}", path.display()))
}

pub fn resolve_set(path: &Path) -> Result<SetSource, CliError> {
    let meta = fs::metadata(path).map_err(|e| io_err(path, e))?;
    if meta.is_dir() {
        if let Some(m) = MANIFEST_NAMES.iter().map(|n| path.join(n)).find(|p| p.is_file()) {
            return Ok(SetSource::Manifest(load_manifest(m)?));
        }
        return image_dir(path);
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: Option<serde_json::Value> = serde_json::from_str(&text).ok();
    if value.as_ref().and_then(|v| v.get("kind")).and_then(|k| k.as_str()) == Some(PROFILE_KIND) {
        let cached: CachedProfile = serde_json::from_str(&text)
            .map_err(|e| CliError::new(ErrorKind::Format, format!("{}: {e}", path.display())))?;
        if cached.schema != PROFILE_SCHEMA {
            return Err(CliError::new(
                ErrorKind::Format,
                format!("{}: unsupported profile schema {}", path.display(), cached.schema),
            ));
        }
        cached.profile.validate()?;
        return Ok(SetSource::Profile(cached.profile));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(SetSource::Manifest(parse_manifest(&text, base)?))
}

fn image_dir(dir: &Path) -> Result<SetSource, CliError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let p = entry.map_err(|e| io_err(dir, e))?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if p.is_file() && matches!(ext.as_deref(), Some("ppm" | "pgm")) {
            files.push(p);
        }
    }
    if files.is_empty() {
        return Err(CliError::new(
            ErrorKind::Input,
            format!("{}: no manifest and no .ppm/.pgm images", dir.display()),
        ));
    }
    files.sort();
    let name = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "images".into());
    Ok(SetSource::Images { name, files })
}

/// Resolves `path` and builds (or loads) its profile under `run`.
///
/// Cached profiles are returned as stored; their own config applies.
pub fn load_profile(path: &Path, run: &RunConfig) -> Result<ImageSetProfile, CliError> {
    let cfg = run.metric_config();
    let (name, samples) = match resolve_set(path)? {
        SetSource::Profile(p) => return Ok(p),
        SetSource::Manifest(m) => (m.name.clone(), manifest_samples(&m, run)?),
        SetSource::Images { name, files } => {
            if run.encoder != EncoderMode::Reference {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!("{}: plain image directories need --encoder reference", path.display()),
                ));
            }
            let mut samples = Vec::new();
            for f in &files {
                let id = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                samples.extend(reference_samples(&id, &read_image(f)?, run)?);
            }
            (name, samples)
        }
    };
    Ok(build_profile(name, samples, &run.stages, &cfg)?)
}

fn manifest_samples(m: &Manifest, run: &RunConfig) -> Result<Vec<StageSample>, CliError> {
    if let Some(s) = run.stages.iter().find(|s| !m.stages.contains(s)) {
        return Err(CliError::new(
            ErrorKind::Input,
            format!("set {:?} does not declare stage {s}", m.name),
        ));
    }
    let mut samples = Vec::new();
    match run.encoder {
        EncoderMode::Manifest => {
            if !m.has_tensors() {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!("set {:?} lists images only; use --encoder reference", m.name),
                ));
            }
            for entry in &m.images {
                let input_size = match (&entry.image, run.target_size) {
                    (Some(img), TargetSize::Input) => {
                        let img = read_image(m.resolve(img))?;
                        Some((img.height(), img.width()))
                    }
                    _ => None,
                };
                for stage in &run.stages {
                    let tensor = read_srgt(m.resolve(&entry.tensors[stage]))?.to_tensor3()?;
                    samples.push(StageSample {
                        image_id: entry.id.clone(),
                        stage: stage.clone(),
                        tensor,
                        input_size,
                    });
                }
            }
        }
        EncoderMode::Reference => {
            for entry in &m.images {
                let img = entry.image.as_ref().ok_or_else(|| {
                    CliError::new(
                        ErrorKind::Input,
                        format!("image {:?} of set {:?} names no image file", entry.id, m.name),
                    )
                })?;
                samples.extend(reference_samples(&entry.id, &read_image(m.resolve(img))?, run)?);
            }
        }
    }
    Ok(samples)
}

fn reference_samples(id: &str, img: &RgbImage, run: &RunConfig) -> Result<Vec<StageSample>, CliError> {
    let stages = encode(&img.to_tensor(), &run.encoder_config())?;
    let available = || stages.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(",");
    if let Some(s) = run.stages.iter().find(|s| !stages.iter().any(|(t, _)| t == *s)) {
        return Err(CliError::new(
            ErrorKind::Config,
            format!("the reference encoder has no stage {s}; available: {}", available()),
        ));
    }
    Ok(stages
        .into_iter()
        .filter(|(s, _): &(StageId, _)| run.stages.contains(s))
        .map(|(stage, tensor)| StageSample {
            image_id: id.to_string(),
            stage,
            tensor,
            input_size: Some((img.height(), img.width())),
        })
        .collect())
}
