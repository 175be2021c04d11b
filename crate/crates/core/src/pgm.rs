//! 16-bit binary PGM (P5) export of intensity images.
//!
//! Values are scaled so the image maximum maps to 65535; the maximum is
//! written as a `# max_value_scale=<v>` comment so a reader can restore
//! physical units. The decoder also accepts 8-bit P5 files and files
//! without the scale comment.

use crate::error::{Error, Result};
use crate::spatial::{IntensityImage, TransverseGrid};

const SCALE_KEY: &str = "max_value_scale=";

pub fn encode(image: &IntensityImage) -> Vec<u8> {
    let max = image.max();
    let mut out = format!(
        "P5\n# {SCALE_KEY}{max}\n{} {}\n65535\n",
        image.grid.width, image.grid.height
    )
    .into_bytes();
    out.reserve(image.pixels.len() * 2);
    for p in &image.pixels {
        let q = if max > 0.0 { (p / max * 65535.0).round().clamp(0.0, 65535.0) as u16 } else { 0 };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Physical value of `maxval`, when the file records one.
    pub scale: Option<f64>,
    pub samples: Vec<u16>,
}

impl Pgm {
    /// Samples mapped back to physical units (raw samples when no scale is recorded).
    pub fn values(&self) -> Vec<f64> {
        let factor = match self.scale {
            Some(s) => s / self.maxval as f64,
            None => 1.0,
        };
        self.samples.iter().map(|v| *v as f64 * factor).collect()
    }

    pub fn to_image(&self, pitch_mm: f64) -> Result<IntensityImage> {
        IntensityImage::new(TransverseGrid::new(self.width, self.height, pitch_mm)?, self.values())
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    line: usize,
    scale: Option<f64>,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.line, message: message.into() }
    }

    fn skip_space_and_comments(&mut self) -> Result<()> {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                let end = self.data[self.pos..].iter().position(|c| *c == b'\n').map_or(self.data.len(), |e| self.pos + e);
                let comment = String::from_utf8_lossy(&self.data[self.pos + 1..end]);
                if let Some(v) = comment.trim().strip_prefix(SCALE_KEY) {
                    let v: f64 = v.trim().parse().map_err(|_| self.err(format!("bad scale comment `{}`", comment.trim())))?;
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(self.err("scale must be finite and >= 0"));
                    }
                    self.scale = Some(v);
                }
                self.pos = end;
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("{what} out of range")))
    }
}

pub fn decode(data: &[u8]) -> Result<Pgm> {
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(Error::Parse { line: 1, message: "missing P5 magic".into() });
    }
    let mut cur = Cursor { data, pos: 2, line: 1, scale: None };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("image dimensions must be non-zero"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.err(format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match data.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected whitespace after maxval")),
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let count = width.checked_mul(height).ok_or_else(|| cur.err("image too large"))?;
    let need = count.checked_mul(bytes_per).ok_or_else(|| cur.err("image too large"))?;
    let raster = &data[cur.pos..];
    if raster.len() < need {
        return Err(Error::InvalidData(format!("raster has {} bytes, expected {need}", raster.len())));
    }
    let samples: Vec<u16> = if bytes_per == 1 {
        raster[..need].iter().map(|b| *b as u16).collect()
    } else {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if let Some(bad) = samples.iter().find(|s| **s as usize > maxval) {
        return Err(Error::InvalidData(format!("sample {bad} exceeds maxval {maxval}")));
    }
    Ok(Pgm { width, height, maxval: maxval as u16, scale: cur.scale, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_keeps_scale() {
        let grid = TransverseGrid::new(3, 2, 0.5).unwrap();
        let img = IntensityImage::new(grid, vec![0.0, 1.0, 2.0, 4.0, 0.5, 0.25]).unwrap();
        let bytes = encode(&img);
        assert!(bytes.starts_with(b"P5\n# max_value_scale=4\n3 2\n65535\n"));
        let pgm = decode(&bytes).unwrap();
        assert_eq!((pgm.width, pgm.height, pgm.maxval), (3, 2, 65535));
        assert_eq!(pgm.scale, Some(4.0));
        for (a, b) in pgm.values().iter().zip(&img.pixels) {
            assert!((a - b).abs() <= 4.0 / 65535.0);
        }
    }

    #[test]
    fn eight_bit_without_scale() {
        let mut data = b"P5 2 1 255\n".to_vec();
        data.extend_from_slice(&[7, 255]);
        let pgm = decode(&data).unwrap();
        assert_eq!(pgm.values(), vec![7.0, 255.0]);
    }

    #[test]
    fn malformed_headers() {
        assert!(decode(b"P2\n1 1\n255\n\0").is_err());
        assert!(decode(b"P5\n0 1\n255\n").is_err());
        assert!(decode(b"P5\n2 2\n255\n\0").is_err());
        assert!(decode(b"P5\n1 1\n70000\n\0\0").is_err());
        assert!(decode(b"P5\n1 1\n10\n\x0b").is_err());
    }
}
