//! SRGT: a minimal little-endian tensor container.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "SRGT"
//! 4       1         version (1)
//! 5       1         dtype   (0 = f32 LE, 1 = u8)
//! 6       1         ndim    (1..=4)
//! 7       4·ndim    shape, u32 LE each, outermost first
//! ...     payload   row-major elements
//! ```

use std::fs;
use std::path::Path;

use super::FormatError;
use crate::fid::FeatureMatrix;
use crate::tensor::Tensor3;

pub const SRGT_MAGIC: [u8; 4] = *b"SRGT";
pub const SRGT_VERSION: u8 = 1;
const MAX_ELEMENTS: u64 = 1 << 31;
const FIXED_HEADER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::U8 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, FormatError> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::U8),
            other => Err(FormatError::UnsupportedDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

/// Raw SRGT contents: dtype, shape and the little-endian payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrgtTensor {
    dtype: Dtype,
    shape: Vec<u32>,
    payload: Vec<u8>,
}

fn element_count(shape: &[u32]) -> Result<u64, FormatError> {
    let mut n: u64 = 1;
    for &d in shape {
        n = n.saturating_mul(u64::from(d));
    }
    if n > MAX_ELEMENTS {
        return Err(FormatError::ShapeOverflow(shape.to_vec()));
    }
    Ok(n)
}

impl SrgtTensor {
    pub fn new(dtype: Dtype, shape: Vec<u32>, payload: Vec<u8>) -> Result<Self, FormatError> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(FormatError::BadNdim(shape.len().min(255) as u8));
        }
        let expected = element_count(&shape)? as usize * dtype.size();
        if payload.len() != expected {
            return Err(FormatError::Layout(format!(
                "payload of {} bytes for shape {shape:?} ({expected} expected)",
                payload.len()
            )));
        }
        Ok(Self { dtype, shape, payload })
    }

    pub fn from_f32(shape: Vec<u32>, values: &[f32]) -> Result<Self, FormatError> {
        let payload = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(Dtype::F32, shape, payload)
    }

    pub fn from_u8(shape: Vec<u32>, values: Vec<u8>) -> Result<Self, FormatError> {
        Self::new(Dtype::U8, shape, values)
    }

    /// Stores a tensor as `f32` with shape `[C, H, W]`.
    pub fn from_tensor3(t: &Tensor3) -> Result<Self, FormatError> {
        let (c, h, w) = t.shape();
        let values: Vec<f32> = t.data().iter().map(|&v| v as f32).collect();
        Self::from_f32(vec![c as u32, h as u32, w as u32], &values)
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn shape(&self) -> &[u32] {
        &self.shape
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn len(&self) -> usize {
        self.payload.len() / self.dtype.size()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    /// Elements widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self.dtype {
            Dtype::F32 => self
                .payload
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                .collect(),
            Dtype::U8 => self.payload.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    /// Interprets `[C, H, W]`, or `[1, C, H, W]` with a unit batch axis.
    pub fn to_tensor3(&self) -> Result<Tensor3, FormatError> {
        let dims: Vec<usize> = self.shape.iter().map(|&d| d as usize).collect();
        let (c, h, w) = match dims[..] {
            [c, h, w] => (c, h, w),
            [1, c, h, w] => (c, h, w),
            _ => {
                return Err(FormatError::Layout(format!(
                    "expected a C×H×W activation tensor, got shape {:?}",
                    self.shape
                )))
            }
        };
        Tensor3::new(c, h, w, self.to_f64()).map_err(|e| FormatError::Layout(e.to_string()))
    }

    /// Interprets a 2-D float tensor as `rows` samples of `cols` features.
    pub fn to_feature_matrix(&self) -> Result<FeatureMatrix, FormatError> {
        if self.dtype != Dtype::F32 || self.shape.len() != 2 {
            return Err(FormatError::Layout(format!(
                "expected a 2-D f32 feature tensor, got {:?} {:?}",
                self.dtype, self.shape
            )));
        }
        FeatureMatrix::from_row_major(self.shape[0] as usize, self.shape[1] as usize, &self.to_f64())
            .map_err(|e| FormatError::Layout(e.to_string()))
    }
}

pub fn encode_srgt(t: &SrgtTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(FIXED_HEADER + 4 * t.shape.len() + t.payload.len());
    out.extend_from_slice(&SRGT_MAGIC);
    out.push(SRGT_VERSION);
    out.push(t.dtype.code());
    out.push(t.shape.len() as u8);
    for d in &t.shape {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&t.payload);
    out
}

pub fn decode_srgt(bytes: &[u8]) -> Result<SrgtTensor, FormatError> {
    if bytes.len() < FIXED_HEADER {
        return Err(FormatError::TruncatedHeader {
            expected: FIXED_HEADER,
            got: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("length checked");
    if magic != SRGT_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes[4] != SRGT_VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    let dtype = Dtype::from_code(bytes[5])?;
    let ndim = bytes[6];
    if !(1..=4).contains(&ndim) {
        return Err(FormatError::BadNdim(ndim));
    }
    let header_len = FIXED_HEADER + 4 * ndim as usize;
    if bytes.len() < header_len {
        return Err(FormatError::TruncatedHeader {
            expected: header_len,
            got: bytes.len(),
        });
    }
    let shape: Vec<u32> = bytes[FIXED_HEADER..header_len]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let expected = element_count(&shape)? as usize * dtype.size();
    let payload = &bytes[header_len..];
    if payload.len() < expected {
        return Err(FormatError::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes {
            extra: payload.len() - expected,
        });
    }
    Ok(SrgtTensor {
        dtype,
        shape,
        payload: payload.to_vec(),
    })
}

pub fn write_srgt(path: impl AsRef<Path>, t: &SrgtTensor) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_srgt(t)).map_err(|e| FormatError::io(path, e))
}

pub fn read_srgt(path: impl AsRef<Path>) -> Result<SrgtTensor, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_srgt(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(dtype: u8, shape: &[u32]) -> Vec<u8> {
        let mut b = b"SRGT".to_vec();
        b.extend_from_slice(&[1, dtype, shape.len() as u8]);
        for d in shape {
            b.extend_from_slice(&d.to_le_bytes());
        }
        b
    }

    #[test]
    fn layout_is_pinned() {
        let t = SrgtTensor::from_f32(vec![1, 2], &[1.0, -2.0]).unwrap();
        let bytes = encode_srgt(&t);
        let mut expected = header(0, &[1, 2]);
        expected.extend_from_slice(&[0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0]);
        assert_eq!(bytes, expected);
        assert_eq!(bytes.len(), 7 + 8 + 8);
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.srgt");
        let values: Vec<f32> = (0..24).map(|i| i as f32 * 0.5 - 3.0).collect();
        let t = SrgtTensor::from_f32(vec![2, 3, 4], &values).unwrap();
        write_srgt(&path, &t).unwrap();
        let back = read_srgt(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.payload(), t.payload());
        let t3 = back.to_tensor3().unwrap();
        assert_eq!(t3.shape(), (2, 3, 4));
        assert_eq!(t3.get(1, 2, 3), 8.5);
    }

    #[test]
    fn decode_errors_are_distinct() {
        let mut bad_magic = header(0, &[1]);
        bad_magic[3] = b'X';
        bad_magic.extend_from_slice(&[0; 4]);
        assert!(matches!(decode_srgt(&bad_magic), Err(FormatError::BadMagic(m)) if &m == b"SRGX"));

        let mut v2 = header(0, &[1]);
        v2[4] = 2;
        assert!(matches!(decode_srgt(&v2), Err(FormatError::UnsupportedVersion(2))));

        assert!(matches!(decode_srgt(&header(7, &[1])), Err(FormatError::UnsupportedDtype(7))));

        let mut nd = header(0, &[]);
        nd[6] = 5;
        assert!(matches!(decode_srgt(&nd), Err(FormatError::BadNdim(5))));

        let mut short = header(0, &[2, 3]);
        short.extend_from_slice(&[0; 20]);
        assert!(matches!(
            decode_srgt(&short),
            Err(FormatError::TruncatedPayload { expected: 24, got: 20 })
        ));

        let huge = header(1, &[1 << 16, 1 << 16]);
        assert!(matches!(decode_srgt(&huge), Err(FormatError::ShapeOverflow(_))));

        assert!(matches!(decode_srgt(b"SRG"), Err(FormatError::TruncatedHeader { .. })));
        assert!(matches!(decode_srgt(&header(0, &[3])[..10]), Err(FormatError::TruncatedHeader { .. })));

        let mut long = header(1, &[2]);
        long.extend_from_slice(&[1, 2, 3]);
        assert!(matches!(decode_srgt(&long), Err(FormatError::TrailingBytes { extra: 1 })));
    }

    #[test]
    fn conversions() {
        let t = SrgtTensor::from_u8(vec![1, 2, 1, 2], vec![0, 1, 2, 255]).unwrap();
        let t3 = t.to_tensor3().unwrap();
        assert_eq!(t3.shape(), (2, 1, 2));
        assert_eq!(t3.data(), &[0.0, 1.0, 2.0, 255.0]);
        assert!(t.to_feature_matrix().is_err());

        let f = SrgtTensor::from_f32(vec![3, 2], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let m = f.to_feature_matrix().unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert!(f.to_tensor3().is_err());
        assert!(SrgtTensor::from_f32(vec![1, 2, 3, 4, 5], &[0.0; 120]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_is_identity(
            shape in prop::collection::vec(1u32..5, 1..=4),
            is_float in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let n: usize = shape.iter().map(|&d| d as usize).product();
            let dtype = if is_float { Dtype::F32 } else { Dtype::U8 };
            let payload: Vec<u8> = (0..n * dtype.size())
                .map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8)
                .collect();
            let t = SrgtTensor::new(dtype, shape, payload).unwrap();
            let bytes = encode_srgt(&t);
            prop_assert_eq!(decode_srgt(&bytes).unwrap(), t);
        }
    }
}
