//! File formats: SRGT tensors, binary PGM/PPM images, set manifests and
//! similarity reports.

mod manifest;
mod pnm;
mod report;
mod srgt;

use std::path::PathBuf;

use thiserror::Error;

use crate::metric::StageId;

pub use manifest::{load_manifest, parse_manifest, Manifest, ManifestEntry, MANIFEST_SCHEMA};
pub use pnm::{decode_pnm, encode_ppm, read_image, write_ppm};
pub use report::{write_report, Report, ReportFormat, REPORT_SCHEMA, TOOL_VERSION};
pub use srgt::{decode_srgt, encode_srgt, read_srgt, write_srgt, Dtype, SrgtTensor, SRGT_MAGIC, SRGT_VERSION};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic {0:?}, expected \"SRGT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported SRGT version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported SRGT dtype {0}")]
    UnsupportedDtype(u8),
    #[error("ndim {0} outside 1..=4")]
    BadNdim(u8),
    #[error("header truncated: {got} of {expected} bytes")]
    TruncatedHeader { expected: usize, got: usize },
    #[error("payload truncated: {got} of {expected} bytes")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("{extra} unexpected bytes after payload")]
    TrailingBytes { extra: usize },
    #[error("shape {0:?} holds more than 2^31 elements")]
    ShapeOverflow(Vec<u32>),
    #[error("tensor layout mismatch: {0}")]
    Layout(String),

    #[error("unsupported image format {0:?}, expected binary P5 or P6")]
    UnsupportedImageFormat(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("pixel data truncated: {got} of {expected} bytes")]
    TruncatedPixels { expected: usize, got: usize },

    #[error("manifest: {0}")]
    Manifest(String),
    #[error("image {image:?} has no tensor for stage {stage}")]
    MissingStage { image: String, stage: StageId },
    #[error("unknown report format {0:?}, expected json or csv")]
    UnknownReportFormat(String),
    #[error("report: {0}")]
    Report(String),
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            source,
        }
    }
}
