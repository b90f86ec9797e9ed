//! Binary PGM (P5) / PPM (P6) codec, maxval 255 only.

use super::{Image, ImagingError, Result};

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImagingError::MalformedHeader(format!("missing {what}")));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token(what)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                ImagingError::MalformedHeader(format!(
                    "{what} is not a decimal integer: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Decodes a binary PGM or PPM byte stream.
pub fn load_pnm(bytes: &[u8]) -> Result<Image> {
    let mut rd = HeaderReader { bytes, pos: 0 };
    let channels = match rd.token("magic")? {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(ImagingError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(ImagingError::MalformedHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let maxval = rd.number("maxval")?;
    if maxval != 255 {
        return Err(ImagingError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => {
            return Err(ImagingError::MalformedHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImagingError::MalformedHeader("dimensions overflow".into()))?;
    let raster = &bytes[rd.pos..];
    if raster.len() < expected {
        return Err(ImagingError::TruncatedRaster {
            expected,
            got: raster.len(),
        });
    }
    Image::new(width, height, channels, raster[..expected].to_vec())
}

/// Encodes an image as P5 (gray) or P6 (RGB) with a minimal header.
pub fn save_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}
