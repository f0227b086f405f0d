//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use super::FormatError;
use crate::encoder::RgbImage;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, FormatError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FormatError::MalformedHeader(format!("missing or invalid {what}")))
    }
}

/// Decodes P5/P6 bytes to an RGB image in `[0, 1]`; gray is replicated.
pub fn decode_pnm(bytes: &[u8]) -> Result<RgbImage, FormatError> {
    if bytes.len() < 2 {
        return Err(FormatError::MalformedHeader("file too short".into()));
    }
    let magic = &bytes[..2];
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(FormatError::UnsupportedImageFormat(String::from_utf8_lossy(magic).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(FormatError::MalformedHeader(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(FormatError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(FormatError::MalformedHeader("no whitespace after maxval".into())),
    }
    let plane = width * height;
    let expected = plane * channels;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(FormatError::TruncatedPixels {
            expected,
            got: raster.len(),
        });
    }
    let mut pixels = vec![0.0; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            let sample = if channels == 1 { raster[i] } else { raster[i * 3 + c] };
            pixels[c * plane + i] = f64::from(sample) / 255.0;
        }
    }
    RgbImage::new(height, width, pixels).map_err(|e| FormatError::MalformedHeader(e.to_string()))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_pnm(&bytes)
}

/// Encodes as P6, rounding each channel to the nearest of 256 levels.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let (h, w) = (img.height(), img.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.push((img.get(c, y, x) * 255.0).round() as u8);
            }
        }
    }
    out
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| FormatError::io(path, e))
}
