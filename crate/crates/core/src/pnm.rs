//! Binary PPM (P6) images and PGM (P5) label maps.

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != 3 * width * height {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (pixels.len() / 3, 1),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Self {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Per-site integer labels (layer indices or raw gray values), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimMismatch {
                expected: (width, height),
                found: (labels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Binarizes gray values: `> 127` becomes 1, everything else 0.
    pub fn threshold(&self) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|&v| u8::from(v > 127)).collect(),
        }
    }

    pub fn max_label(&self) -> Option<u8> {
        self.labels.iter().copied().max()
    }
}

pub fn write_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let (w, h, data) = parse_pnm(bytes, b"P6", 3)?;
    RgbImage::new(w, h, data.to_vec())
}

pub fn write_pgm(labels: &LabelMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", labels.width, labels.height).into_bytes();
    out.extend_from_slice(&labels.labels);
    out
}

/// Reads raw gray values; use [`LabelMap::threshold`] for binary ground truth.
pub fn read_pgm(bytes: &[u8]) -> Result<LabelMap> {
    let (w, h, data) = parse_pnm(bytes, b"P5", 1)?;
    LabelMap::new(w, h, data.to_vec())
}

fn parse_pnm<'a>(bytes: &'a [u8], magic: &[u8], channels: usize) -> Result<(usize, usize, &'a [u8])> {
    let bad = |msg: &str| Error::MalformedHeader(msg.to_string());
    if bytes.len() < 2 || &bytes[0..2] != magic {
        return Err(bad("wrong magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(bad("unexpected end of header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a decimal number"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii digits"))?;
        *field = text.parse().map_err(|_| bad("number out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("missing whitespace after maxval")),
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err(bad("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit maxval is supported"));
    }
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| bad("dimensions overflow"))?;
    let data = &bytes[pos..];
    if data.len() != need {
        return Err(Error::Truncated {
            expected: pos + need,
            actual: bytes.len(),
        });
    }
    Ok((w, h, data))
}
