//! Attention-histogram similarity between image sets.
//!
//! Per image and encoder stage, an attention map is quantized to 8 bits and
//! binned into a 256-bin intensity histogram. Histograms are averaged over an
//! image set, the low-intensity bins are dropped, and two sets are scored per
//! stage with the Pearson correlation of their averaged histograms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tensor::{attention_map, AttentionMap, Map2, Tensor3, TensorError};

pub const BIN_COUNT: usize = 256;
pub const DEFAULT_TEMPERATURE: f64 = 10.0;
pub const DEFAULT_EXCLUDE_BELOW: u8 = 100;
/// Identifier of the quantization rule implemented by [`quantize`].
pub const QUANTIZATION_RULE: &str = "minmax-round-half-up";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("exclusion mismatch: {0} vs {1}")]
    ExclusionMismatch(u8, u8),
    #[error("histogram has no accumulated images")]
    EmptySet,
    #[error("only {0} bins participate after exclusion, need at least 2")]
    TooFewBins(usize),
    #[error("degenerate histogram: {0} has zero variance over participating bins")]
    Degenerate(String),
    #[error("image {image:?} is missing stage {stage}")]
    MissingStage { image: String, stage: StageId },
    #[error("image {image:?} supplies stage {stage} more than once")]
    DuplicateStage { image: String, stage: StageId },
    #[error("image {image:?} supplies unconfigured stage {stage}")]
    UnknownStage { image: String, stage: StageId },
    #[error("config fingerprint mismatch: {0} vs {1}")]
    FingerprintMismatch(String, String),
    #[error("stage sets differ: [{0}] vs [{1}]")]
    StageMismatch(String, String),
    #[error("invalid stage id {0:?}")]
    InvalidStageId(String),
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Attention map quantized to 8-bit intensities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl QuantizedMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, MetricError> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(MetricError::InvalidHistogram(format!(
                "quantized map {height}x{width} with {} values",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Min–max normalizes a map and rounds to `0..=255`, half up.
/// A constant map quantizes to all zeros.
pub fn quantize_map(m: &Map2) -> QuantizedMap {
    let (lo, hi) = (m.min(), m.max());
    let span = hi - lo;
    let data = if span > 0.0 {
        m.data()
            .iter()
            .map(|&v| {
                let unit = (v - lo) / span;
                (unit * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
            })
            .collect()
    } else {
        vec![0; m.len()]
    };
    QuantizedMap {
        height: m.height(),
        width: m.width(),
        data,
    }
}

pub fn quantize(a: &AttentionMap) -> QuantizedMap {
    quantize_map(a.map())
}

/// 256-bin intensity histogram with an inclusive low-bin exclusion.
///
/// Bins `0..=excluded_below` are carried along but never take part in
/// [`correlation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistogram", into = "RawHistogram")]
pub struct IntensityHistogram {
    bins: Vec<f64>,
    excluded_below: u8,
    image_count: u64,
}

#[derive(Serialize, Deserialize)]
struct RawHistogram {
    excluded_below: u8,
    image_count: u64,
    bins: Vec<f64>,
}

impl TryFrom<RawHistogram> for IntensityHistogram {
    type Error = MetricError;

    fn try_from(raw: RawHistogram) -> Result<Self, Self::Error> {
        IntensityHistogram::from_parts(raw.bins, raw.excluded_below, raw.image_count)
    }
}

impl From<IntensityHistogram> for RawHistogram {
    fn from(h: IntensityHistogram) -> Self {
        RawHistogram {
            excluded_below: h.excluded_below,
            image_count: h.image_count,
            bins: h.bins,
        }
    }
}

impl IntensityHistogram {
    /// Empty accumulator (`image_count = 0`).
    pub fn zero(excluded_below: u8) -> Self {
        Self {
            bins: vec![0.0; BIN_COUNT],
            excluded_below,
            image_count: 0,
        }
    }

    pub fn from_parts(bins: Vec<f64>, excluded_below: u8, image_count: u64) -> Result<Self, MetricError> {
        if bins.len() != BIN_COUNT {
            return Err(MetricError::InvalidHistogram(format!(
                "expected {BIN_COUNT} bins, got {}",
                bins.len()
            )));
        }
        if let Some(i) = bins.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MetricError::InvalidHistogram(format!("bin {i} is {}", bins[i])));
        }
        Ok(Self {
            bins,
            excluded_below,
            image_count,
        })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn excluded_below(&self) -> u8 {
        self.excluded_below
    }

    pub fn image_count(&self) -> u64 {
        self.image_count
    }

    /// Bins that take part in [`correlation`].
    pub fn participating(&self) -> &[f64] {
        &self.bins[self.excluded_below as usize + 1..]
    }

    pub fn is_excluded(&self, bin: usize) -> bool {
        bin <= self.excluded_below as usize
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// Counts pixels per intensity; the result has `image_count = 1`.
pub fn histogram(q: &QuantizedMap, excluded_below: u8) -> IntensityHistogram {
    let mut h = IntensityHistogram::zero(excluded_below);
    for &v in &q.data {
        h.bins[v as usize] += 1.0;
    }
    h.image_count = 1;
    h
}

/// Bin-wise sum of two histograms, summing image counts.
pub fn accumulate(acc: &IntensityHistogram, h: &IntensityHistogram) -> Result<IntensityHistogram, MetricError> {
    if acc.excluded_below != h.excluded_below {
        return Err(MetricError::ExclusionMismatch(acc.excluded_below, h.excluded_below));
    }
    Ok(IntensityHistogram {
        bins: acc.bins.iter().zip(&h.bins).map(|(a, b)| a + b).collect(),
        excluded_below: acc.excluded_below,
        image_count: acc.image_count + h.image_count,
    })
}

/// Divides every bin by the number of accumulated images.
pub fn mean_histogram(acc: &IntensityHistogram) -> Result<IntensityHistogram, MetricError> {
    if acc.image_count == 0 {
        return Err(MetricError::EmptySet);
    }
    let n = acc.image_count as f64;
    Ok(IntensityHistogram {
        bins: acc.bins.iter().map(|v| v / n).collect(),
        ..acc.clone()
    })
}

/// Pearson correlation of two histograms over the bins above the exclusion.
///
/// ```text
/// d = Σ(H1 − H̄1)(H2 − H̄2) / sqrt(Σ(H1 − H̄1)² · Σ(H2 − H̄2)²)
/// ```
///
/// with the means taken over participating bins only.
pub fn correlation(h1: &IntensityHistogram, h2: &IntensityHistogram) -> Result<f64, MetricError> {
    if h1.excluded_below != h2.excluded_below {
        return Err(MetricError::ExclusionMismatch(h1.excluded_below, h2.excluded_below));
    }
    let (a, b) = (h1.participating(), h2.participating());
    let n = a.len();
    if n < 2 {
        return Err(MetricError::TooFewBins(n));
    }
    for (label, side) in [("first histogram", a), ("second histogram", b)] {
        let first = side[0];
        if side.iter().all(|&v| v == first) {
            return Err(MetricError::Degenerate(label.to_string()));
        }
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let (mut cross, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cross += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    Ok((cross / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// Label of an encoder stage, e.g. `E3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StageId(String);

impl StageId {
    pub fn new(label: impl Into<String>) -> Result<Self, MetricError> {
        let label = label.into();
        if label.trim().is_empty() || label.trim() != label || label.contains(',') {
            return Err(MetricError::InvalidStageId(label));
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StageId {
    type Error = MetricError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        StageId::new(s)
    }
}

impl From<StageId> for String {
    fn from(s: StageId) -> Self {
        s.0
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The default `E2, E3, E4` stage labels.
pub fn default_stages() -> Vec<StageId> {
    ["E2", "E3", "E4"].into_iter().map(|s| StageId(s.to_string())).collect()
}

/// Resolution every attention map is resized to before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetSize {
    /// The resolution of the input image.
    Input,
    Fixed { height: usize, width: usize },
}

impl fmt::Display for TargetSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSize::Input => f.write_str("input"),
            TargetSize::Fixed { height, width } => write!(f, "{height}x{width}"),
        }
    }
}

impl std::str::FromStr for TargetSize {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "input" {
            return Ok(TargetSize::Input);
        }
        let bad = || MetricError::InvalidConfig(format!("target size {s:?} is not \"input\" or HxW"));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let height: usize = h.parse().map_err(|_| bad())?;
        let width: usize = w.parse().map_err(|_| bad())?;
        if height == 0 || width == 0 {
            return Err(bad());
        }
        Ok(TargetSize::Fixed { height, width })
    }
}

impl TryFrom<String> for TargetSize {
    type Error = MetricError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TargetSize> for String {
    fn from(t: TargetSize) -> Self {
        t.to_string()
    }
}

/// Every setting that changes a histogram. Two profiles are comparable
/// exactly when their fingerprints agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub temperature: f64,
    pub target_size: TargetSize,
    pub exclude_below: u8,
    pub quantization: String,
    /// Opaque description of where activations come from (encoder mode,
    /// seed, ...). Folded into the fingerprint.
    #[serde(default)]
    pub provenance: String,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            target_size: TargetSize::Input,
            exclude_below: DEFAULT_EXCLUDE_BELOW,
            quantization: QUANTIZATION_RULE.to_string(),
            provenance: String::new(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(TensorError::BadTemperature(self.temperature).into());
        }
        if self.quantization != QUANTIZATION_RULE {
            return Err(MetricError::InvalidConfig(format!(
                "unknown quantization rule {:?}",
                self.quantization
            )));
        }
        if self.exclude_below as usize > BIN_COUNT - 3 {
            return Err(MetricError::TooFewBins(BIN_COUNT - 1 - self.exclude_below as usize));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of a canonical rendering of every
    /// field.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "temperature={:016x};target_size={};exclude_below={};quantization={};provenance={}",
            self.temperature.to_bits(),
            self.target_size,
            self.exclude_below,
            self.quantization,
            self.provenance
        );
        Sha256::digest(canonical.as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// One stage's activations for one image.
#[derive(Debug, Clone)]
pub struct StageSample {
    pub image_id: String,
    pub stage: StageId,
    pub tensor: Tensor3,
    /// Input image resolution, used when the target size is `input`.
    pub input_size: Option<(usize, usize)>,
}

/// Averaged per-stage histograms of one image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSetProfile {
    name: String,
    config: MetricConfig,
    config_fingerprint: String,
    image_count: u64,
    stages: Vec<(StageId, IntensityHistogram)>,
}

impl ImageSetProfile {
    /// Assembles a profile from already-averaged histograms.
    pub fn new(
        name: impl Into<String>,
        config: MetricConfig,
        stages: Vec<(StageId, IntensityHistogram)>,
    ) -> Result<Self, MetricError> {
        let Some((_, first)) = stages.first() else {
            return Err(MetricError::InvalidProfile("no stages".into()));
        };
        let image_count = first.image_count();
        if image_count == 0 {
            return Err(MetricError::EmptySet);
        }
        for (i, (stage, h)) in stages.iter().enumerate() {
            if stages[..i].iter().any(|(s, _)| s == stage) {
                return Err(MetricError::InvalidProfile(format!("stage {stage} repeated")));
            }
            if h.image_count() != image_count {
                return Err(MetricError::InvalidProfile(format!(
                    "stage {stage} averages {} images, expected {image_count}",
                    h.image_count()
                )));
            }
            if h.excluded_below() != config.exclude_below {
                return Err(MetricError::ExclusionMismatch(config.exclude_below, h.excluded_below()));
            }
        }
        Ok(Self {
            name: name.into(),
            config_fingerprint: config.fingerprint(),
            config,
            image_count,
            stages,
        })
    }

    /// Re-checks invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), MetricError> {
        let rebuilt = Self::new(self.name.clone(), self.config.clone(), self.stages.clone())?;
        if rebuilt.config_fingerprint != self.config_fingerprint {
            return Err(MetricError::InvalidProfile(
                "stored fingerprint does not match stored config".into(),
            ));
        }
        if rebuilt.image_count != self.image_count {
            return Err(MetricError::InvalidProfile("image count mismatch".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn config(&self) -> &MetricConfig {
        &self.config
    }

    pub fn config_fingerprint(&self) -> &str {
        &self.config_fingerprint
    }

    pub fn image_count(&self) -> u64 {
        self.image_count
    }

    pub fn stages(&self) -> &[(StageId, IntensityHistogram)] {
        &self.stages
    }

    pub fn stage(&self, id: &StageId) -> Option<&IntensityHistogram> {
        self.stages.iter().find(|(s, _)| s == id).map(|(_, h)| h)
    }

    pub fn stage_ids(&self) -> Vec<StageId> {
        self.stages.iter().map(|(s, _)| s.clone()).collect()
    }
}

/// Per-stage similarity of two image sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub set_a: String,
    pub set_b: String,
    pub scores: Vec<(StageId, f64)>,
    pub config_fingerprint: String,
}

/// Histogram of one stage of one image.
pub fn stage_histogram(
    tensor: &Tensor3,
    target: (usize, usize),
    config: &MetricConfig,
) -> Result<IntensityHistogram, MetricError> {
    let att = attention_map(tensor, target.0, target.1, config.temperature)?;
    Ok(histogram(&quantize(&att), config.exclude_below))
}

/// Runs the attention → quantize → histogram pipeline for every sample and
/// averages per stage.
///
/// Each image must supply each of `stages` exactly once. The result does not
/// depend on sample order.
pub fn build_profile(
    name: impl Into<String>,
    samples: impl IntoIterator<Item = StageSample>,
    stages: &[StageId],
    config: &MetricConfig,
) -> Result<ImageSetProfile, MetricError> {
    config.validate()?;
    if stages.is_empty() {
        return Err(MetricError::InvalidConfig("no stages configured".into()));
    }

    let mut images: BTreeMap<String, Vec<StageSample>> = BTreeMap::new();
    for s in samples {
        if !stages.contains(&s.stage) {
            return Err(MetricError::UnknownStage {
                image: s.image_id,
                stage: s.stage,
            });
        }
        let entry = images.entry(s.image_id.clone()).or_default();
        if entry.iter().any(|e| e.stage == s.stage) {
            return Err(MetricError::DuplicateStage {
                image: s.image_id,
                stage: s.stage,
            });
        }
        entry.push(s);
    }
    if images.is_empty() {
        return Err(MetricError::EmptySet);
    }

    let mut acc: Vec<IntensityHistogram> = stages
        .iter()
        .map(|_| IntensityHistogram::zero(config.exclude_below))
        .collect();
    for (image, samples) in &images {
        let target = resolve_target(config.target_size, samples);
        for (slot, stage) in acc.iter_mut().zip(stages) {
            let sample = samples
                .iter()
                .find(|s| &s.stage == stage)
                .ok_or_else(|| MetricError::MissingStage {
                    image: image.clone(),
                    stage: stage.clone(),
                })?;
            *slot = accumulate(slot, &stage_histogram(&sample.tensor, target, config)?)?;
        }
    }

    let averaged = stages
        .iter()
        .cloned()
        .zip(acc.iter().map(mean_histogram))
        .map(|(s, h)| h.map(|h| (s, h)))
        .collect::<Result<Vec<_>, _>>()?;
    ImageSetProfile::new(name, config.clone(), averaged)
}

// `input` falls back to the largest stage resolution when the image size is
// unknown.
fn resolve_target(target: TargetSize, samples: &[StageSample]) -> (usize, usize) {
    match target {
        TargetSize::Fixed { height, width } => (height, width),
        TargetSize::Input => samples
            .iter()
            .find_map(|s| s.input_size)
            .unwrap_or_else(|| {
                samples.iter().fold((1, 1), |(h, w), s| {
                    (h.max(s.tensor.height()), w.max(s.tensor.width()))
                })
            }),
    }
}

/// Scores two profiles stage by stage.
pub fn compare_profiles(a: &ImageSetProfile, b: &ImageSetProfile) -> Result<SimilarityReport, MetricError> {
    if a.config_fingerprint != b.config_fingerprint {
        return Err(MetricError::FingerprintMismatch(
            a.config_fingerprint.clone(),
            b.config_fingerprint.clone(),
        ));
    }
    let join = |p: &ImageSetProfile| {
        p.stages
            .iter()
            .map(|(s, _)| s.as_str())
            .collect::<Vec<_>>()
            .join(",")
    };
    let same_set = a.stages.len() == b.stages.len() && a.stages.iter().all(|(s, _)| b.stage(s).is_some());
    if !same_set {
        return Err(MetricError::StageMismatch(join(a), join(b)));
    }
    let scores = a
        .stages
        .iter()
        .map(|(stage, ha)| {
            let hb = b.stage(stage).expect("stage sets checked above");
            correlation(ha, hb)
                .map(|d| (stage.clone(), d))
                .map_err(|e| match e {
                    MetricError::Degenerate(which) => {
                        let set = if which.starts_with("first") { &a.name } else { &b.name };
                        MetricError::Degenerate(format!("stage {stage} of set {set:?}"))
                    }
                    other => other,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimilarityReport {
        set_a: a.name.clone(),
        set_b: b.name.clone(),
        scores,
        config_fingerprint: a.config_fingerprint.clone(),
    })
}
