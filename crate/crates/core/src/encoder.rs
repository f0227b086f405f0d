//! Deterministic stand-in for a lane-segmentation encoder, plus synthetic
//! lane-scene and noise images.
//!
//! Every random quantity here (conv weights, image noise) is
//! a pure function of a seed and integer indices, so results do not depend on
//! platform, thread count or call order.

use thiserror::Error;

use crate::metric::{default_stages, StageId};
use crate::tensor::{Tensor3, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("image {height}x{width} is not divisible by the cumulative stride {stride}")]
    Indivisible { height: usize, width: usize, stride: usize },
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("invalid image: {0}")]
    Image(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a seed and a tuple of indices into 64 random bits.
pub fn counter_hash(seed: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(mix64(seed), |h, &i| mix64(h ^ mix64(i)))
}

/// Uniform value in `[0, 1)` with 53 random bits.
pub fn counter_unit(seed: u64, indices: &[u64]) -> f64 {
    (counter_hash(seed, indices) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

// Domain tags keep the different random streams apart.
const TAG_WEIGHT: u64 = 1;
const TAG_NOISE_IMAGE: u64 = 2;
const TAG_LANE_NOISE: u64 = 4;

/// Three-channel image with values in `[0, 1]`, channel-major. Produced by the
/// synthetic generators and by the PGM/PPM decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, EncoderError> {
        if height == 0 || width == 0 || pixels.len() != 3 * height * width {
            return Err(EncoderError::Image(format!(
                "{} values for a 3x{height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EncoderError::Image(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Channel-major values: all red, then green, then blue.
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.pixels[(c * self.height + y) * self.width + x]
    }

    /// Rec. 601 luma.
    pub fn luminance(&self, y: usize, x: usize) -> f64 {
        0.299 * self.get(0, y, x) + 0.587 * self.get(1, y, x) + 0.114 * self.get(2, y, x)
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::new(3, self.height, self.width, self.pixels.clone())
            .expect("image invariants imply a valid tensor")
    }
}

pub type SyntheticImage = RgbImage;

/// Seeded, untrained conv stack; one stage per entry of `stage_channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefEncoderConfig {
    pub seed: u64,
    pub stage_channels: Vec<usize>,
    /// Stride of each stage relative to the previous one.
    pub stage_strides: Vec<usize>,
}

impl Default for RefEncoderConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stage_channels: vec![16, 32, 64],
            stage_strides: vec![4, 2, 2],
        }
    }
}

impl RefEncoderConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.stage_channels.is_empty() || self.stage_channels.len() != self.stage_strides.len() {
            return Err(EncoderError::Config(format!(
                "{} channel entries vs {} stride entries",
                self.stage_channels.len(),
                self.stage_strides.len()
            )));
        }
        if self.stage_channels.contains(&0) || self.stage_strides.contains(&0) {
            return Err(EncoderError::Config("channels and strides must be at least 1".into()));
        }
        Ok(())
    }

    pub fn total_stride(&self) -> usize {
        self.stage_strides.iter().product()
    }

    pub fn stage_count(&self) -> usize {
        self.stage_channels.len()
    }

    /// Short description folded into metric fingerprints.
    pub fn describe(&self) -> String {
        format!(
            "reference(seed={},channels={:?},strides={:?})",
            self.seed, self.stage_channels, self.stage_strides
        )
    }
}

/// Weight of one 3×3 tap: LeCun-uniform in `±sqrt(3 / fan_in)`.
fn conv_weight(seed: u64, layer: usize, out_c: usize, in_c: usize, tap: usize, fan_in: usize) -> f64 {
    let bound = (3.0 / fan_in as f64).sqrt();
    let u = counter_unit(seed, &[TAG_WEIGHT, layer as u64, out_c as u64, in_c as u64, tap as u64]);
    (2.0 * u - 1.0) * bound
}

/// 3×3 convolution, zero padding 1, no bias, followed by ReLU.
fn conv3x3_relu(input: &Tensor3, out_channels: usize, stride: usize, seed: u64, layer: usize) -> Result<Tensor3, TensorError> {
    let (in_c, h, w) = input.shape();
    let (oh, ow) = (h / stride, w / stride);
    let fan_in = in_c * 9;
    let weights: Vec<f64> = (0..out_channels * fan_in)
        .map(|i| {
            let (oc, rest) = (i / fan_in, i % fan_in);
            conv_weight(seed, layer, oc, rest / 9, rest % 9, fan_in)
        })
        .collect();
    let mut out = vec![0.0; out_channels * oh * ow];
    for oc in 0..out_channels {
        let kernel = &weights[oc * fan_in..(oc + 1) * fan_in];
        for oy in 0..oh {
            for ox in 0..ow {
                let (cy, cx) = ((oy * stride) as isize, (ox * stride) as isize);
                let mut acc = 0.0;
                for ic in 0..in_c {
                    let plane = input.channel(ic);
                    for ky in 0..3isize {
                        let y = cy + ky - 1;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kx in 0..3isize {
                            let x = cx + kx - 1;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            acc += kernel[ic * 9 + (ky * 3 + kx) as usize] * plane[y as usize * w + x as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc.max(0.0);
            }
        }
    }
    Tensor3::new(out_channels, oh, ow, out)
}

/// Runs an image tensor through every stage, returning each stage's output.
///
/// Stage labels default to `E2, E3, ...`; use [`encode_labeled`] to supply
/// your own.
pub fn encode(image: &Tensor3, cfg: &RefEncoderConfig) -> Result<Vec<(StageId, Tensor3)>, EncoderError> {
    let labels: Vec<StageId> = if cfg.stage_count() == 3 {
        default_stages()
    } else {
        (0..cfg.stage_count())
            .map(|i| StageId::new(format!("E{}", i + 2)).expect("non-empty label"))
            .collect()
    };
    encode_labeled(image, cfg, &labels)
}

pub fn encode_labeled(
    image: &Tensor3,
    cfg: &RefEncoderConfig,
    labels: &[StageId],
) -> Result<Vec<(StageId, Tensor3)>, EncoderError> {
    cfg.validate()?;
    if labels.len() != cfg.stage_count() {
        return Err(EncoderError::Config(format!(
            "{} stage labels for a {}-stage encoder",
            labels.len(),
            cfg.stage_count()
        )));
    }
    let stride = cfg.total_stride();
    if !image.height().is_multiple_of(stride) || !image.width().is_multiple_of(stride) {
        return Err(EncoderError::Indivisible {
            height: image.height(),
            width: image.width(),
            stride,
        });
    }
    let mut current = image.clone();
    let mut stages = Vec::with_capacity(labels.len());
    for (layer, ((&channels, &s), label)) in cfg
        .stage_channels
        .iter()
        .zip(&cfg.stage_strides)
        .zip(labels)
        .enumerate()
    {
        current = conv3x3_relu(&current, channels, s, cfg.seed, layer)?;
        stages.push((label.clone(), current.clone()));
    }
    Ok(stages)
}

/// Independent uniform values per pixel and channel.
pub fn gen_noise(seed: u64, height: usize, width: usize) -> Result<RgbImage, EncoderError> {
    let pixels = (0..3 * height * width)
        .map(|i| counter_unit(seed, &[TAG_NOISE_IMAGE, i as u64]))
        .collect();
    RgbImage::new(height, width, pixels)
}

/// Road scene: lit background on top, dark road below the horizon, two
/// bright lane stripes converging towards a vanishing point, and ±0.03
/// seeded noise. The layout is the same for every seed; only the noise
/// differs, so two sets of scenes share their structure exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneScene {
    pub image: RgbImage,
    /// Row-major mask of stripe pixels.
    pub stripe_mask: Vec<bool>,
    /// Row-major mask of road pixels outside the stripes.
    pub road_mask: Vec<bool>,
}

pub const ROAD_LUMA: f64 = 0.2;
pub const STRIPE_LUMA: f64 = 0.9;
pub const SKY_LUMA: f64 = 0.575;
pub const LANE_NOISE_AMPLITUDE: f64 = 0.03;

// Layout as fractions of the image size.
const HORIZON: f64 = 0.4;
const VANISH_X: f64 = 0.5;
const LEFT_BOTTOM: f64 = 0.125;
const RIGHT_BOTTOM: f64 = 0.875;
const STRIPE_HALF_WIDTH: f64 = 0.0325;

pub fn gen_lane_scene_with_masks(seed: u64, height: usize, width: usize) -> Result<LaneScene, EncoderError> {
    if height < 32 || width < 32 {
        return Err(EncoderError::Image(format!(
            "lane scenes need at least 32x32 pixels, got {height}x{width}"
        )));
    }
    let (h, w) = (height as f64, width as f64);
    let horizon = h * HORIZON;
    let vanish_x = w * VANISH_X;
    let left_bottom = w * LEFT_BOTTOM;
    let right_bottom = w * RIGHT_BOTTOM;
    let half_width_bottom = w * STRIPE_HALF_WIDTH;
    let sky = SKY_LUMA;

    let mut stripe_mask = vec![false; height * width];
    let mut road_mask = vec![false; height * width];
    let mut luma = vec![sky; height * width];
    for y in 0..height {
        let yc = y as f64 + 0.5;
        if yc < horizon {
            continue;
        }
        // 0 at the horizon, 1 at the bottom edge
        let depth = (yc - horizon) / (h - horizon);
        let half = (half_width_bottom * depth).max(0.5);
        let left = vanish_x + (left_bottom - vanish_x) * depth;
        let right = vanish_x + (right_bottom - vanish_x) * depth;
        for x in 0..width {
            let xc = x as f64 + 0.5;
            let i = y * width + x;
            if (xc - left).abs() <= half || (xc - right).abs() <= half {
                stripe_mask[i] = true;
                luma[i] = STRIPE_LUMA;
            } else {
                road_mask[i] = true;
                luma[i] = ROAD_LUMA;
            }
        }
    }

    let plane = height * width;
    let mut pixels = vec![0.0; 3 * plane];
    for c in 0..3 {
        for i in 0..plane {
            let jitter = (2.0 * counter_unit(seed, &[TAG_LANE_NOISE, c as u64, i as u64]) - 1.0) * LANE_NOISE_AMPLITUDE;
            pixels[c * plane + i] = (luma[i] + jitter).clamp(0.0, 1.0);
        }
    }
    Ok(LaneScene {
        image: RgbImage::new(height, width, pixels)?,
        stripe_mask,
        road_mask,
    })
}

pub fn gen_lane_scene(seed: u64, height: usize, width: usize) -> Result<RgbImage, EncoderError> {
    gen_lane_scene_with_masks(seed, height, width).map(|s| s.image)
}

/// Seed of the `index`-th image of a synthetic set.
pub fn image_seed(set_seed: u64, index: u64) -> u64 {
    counter_hash(set_seed, &[index])
}
