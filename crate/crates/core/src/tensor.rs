//! Dense activation tensors and the three transforms that make up the
//! attention generator: channel energy, bilinear resize, spatial softmax.
//!
//! The attention map of an activation tensor `A` (C×H×W) is
//!
//! ```text
//! softmax_T( upsample( Σ_c A_c² ) )
//! ```
//!
//! where the sum of squares collapses channels into one energy map, the
//! upsample brings every encoder stage to a shared resolution, and the
//! softmax runs over all pixel positions at temperature `T`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimensions must be at least 1, got {0:?}")]
    ZeroDimension(Vec<usize>),
    #[error("data length {got} does not match shape {shape:?} (expected {expected})")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
}

fn first_non_finite(data: &[f64]) -> Option<usize> {
    data.iter().position(|v| !v.is_finite())
}

/// Channel-major C×H×W tensor of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        let shape = vec![channels, height, width];
        if shape.contains(&0) {
            return Err(TensorError::ZeroDimension(shape));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                got: data.len(),
            });
        }
        if let Some(i) = first_non_finite(&data) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self, TensorError> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    /// Builds a tensor from single-precision values, widening to `f64`.
    pub fn from_f32(channels: usize, height: usize, width: usize, data: &[f32]) -> Result<Self, TensorError> {
        Self::new(channels, height, width, data.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// One channel plane as a row-major slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Single-channel H×W map of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Map2 {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Map2 {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if height == 0 || width == 0 {
            return Err(TensorError::ZeroDimension(vec![height, width]));
        }
        if data.len() != height * width {
            return Err(TensorError::LengthMismatch {
                shape: vec![height, width],
                expected: height * width,
                got: data.len(),
            });
        }
        if let Some(i) = first_non_finite(&data) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self, TensorError> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Output of [`spatial_softmax`]: a nonnegative map summing to one,
/// tagged with the temperature that produced it.
///
/// Entries are strictly positive unless `exp` underflows, which only happens
/// when the logit range exceeds roughly `745 · T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    map: Map2,
    temperature: f64,
}

impl AttentionMap {
    pub fn map(&self) -> &Map2 {
        &self.map
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn data(&self) -> &[f64] {
        self.map.data()
    }

    pub fn into_map(self) -> Map2 {
        self.map
    }
}

/// Collapses channels into a per-pixel energy map, `out[y,x] = Σ_c t[c,y,x]²`.
///
/// Fails only if squaring overflows to infinity.
pub fn channel_sum_squares(t: &Tensor3) -> Result<Map2, TensorError> {
    let plane = t.height * t.width;
    let mut out = vec![0.0; plane];
    for c in 0..t.channels {
        for (acc, &v) in out.iter_mut().zip(t.channel(c)) {
            *acc += v * v;
        }
    }
    Map2::new(t.height, t.width, out)
}

// Source sample positions and weights along one axis, half-pixel centers.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    // clamp keeps rounding from stepping outside [a, b]
    (a + (b - a) * f).clamp(a.min(b), a.max(b))
}

/// Bilinear resize with half-pixel centers and edge clamping.
///
/// The source coordinate for destination index `d` is
/// `(d + 0.5) · src/dst − 0.5`, clamped to `[0, src − 1]`.
pub fn bilinear_upsample(m: &Map2, out_h: usize, out_w: usize) -> Result<Map2, TensorError> {
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::ZeroDimension(vec![out_h, out_w]));
    }
    let rows = axis_taps(m.height, out_h);
    let cols = axis_taps(m.width, out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let top = lerp(m.get(y0, x0), m.get(y0, x1), fx);
            let bottom = lerp(m.get(y1, x0), m.get(y1, x1), fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    Map2::new(out_h, out_w, out)
}

/// Softmax over every pixel of `m` at temperature `temperature`.
///
/// Logits are shifted by their maximum before exponentiation.
pub fn spatial_softmax(m: &Map2, temperature: f64) -> Result<AttentionMap, TensorError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(TensorError::BadTemperature(temperature));
    }
    let peak = m.max();
    let mut out: Vec<f64> = m.data().iter().map(|&v| ((v - peak) / temperature).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(AttentionMap {
        map: Map2::new(m.height, m.width, out)?,
        temperature,
    })
}

/// Full attention generator: energy, resize to `target_h × target_w`, softmax.
pub fn attention_map(
    t: &Tensor3,
    target_h: usize,
    target_w: usize,
    temperature: f64,
) -> Result<AttentionMap, TensorError> {
    let energy = channel_sum_squares(t)?;
    let resized = bilinear_upsample(&energy, target_h, target_w)?;
    spatial_softmax(&resized, temperature)
}
