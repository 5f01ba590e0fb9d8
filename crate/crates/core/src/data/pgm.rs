use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skip whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
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

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(start) {
                None => parse_err(start, format!("unexpected end of file, expected {what}")),
                Some(b) => parse_err(
                    start,
                    format!("expected {what}, found {:?}", char::from(*b)),
                ),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(start, format!("{what} is out of range")))
    }
}

/// Decode a P2 (ASCII) or P5 (binary) PGM file.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        Some([b'P', b'1'..=b'7']) => {
            return Err(parse_err(
                0,
                format!(
                    "unsupported format {}; only grayscale P2/P5 is read",
                    String::from_utf8_lossy(&bytes[..2])
                ),
            ))
        }
        _ => return Err(parse_err(0, "missing PGM magic number")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if cur.bytes.get(2).is_some_and(|b| !b.is_ascii_whitespace()) {
        return Err(parse_err(2, "expected whitespace after magic number"));
    }
    let header_at = |c: &Cursor| {
        let mut probe = Cursor {
            bytes: c.bytes,
            pos: c.pos,
        };
        probe.skip_space();
        probe.pos
    };
    let w_at = header_at(&cur);
    let width = cur.number("width")? as usize;
    let h_at = header_at(&cur);
    let height = cur.number("height")? as usize;
    let m_at = header_at(&cur);
    let maxval = cur.number("maxval")?;
    if width == 0 {
        return Err(parse_err(w_at, "width must be positive"));
    }
    if height == 0 {
        return Err(parse_err(h_at, "height must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(
            m_at,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(w_at, "image dimensions overflow"))?;
    let scale = maxval as f64;

    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(parse_err(cur.pos, "expected whitespace before raster")),
        }
        let depth = if maxval > 255 { 2 } else { 1 };
        let need = count * depth;
        let raster = &bytes[cur.pos..];
        if raster.len() < need {
            return Err(parse_err(
                bytes.len(),
                format!("truncated raster: {} of {need} bytes", raster.len()),
            ));
        }
        for i in 0..count {
            let at = cur.pos + i * depth;
            let v = if depth == 2 {
                u16::from_be_bytes([bytes[at], bytes[at + 1]]) as u64
            } else {
                bytes[at] as u64
            };
            if v > maxval {
                return Err(parse_err(at, format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / scale);
        }
    } else {
        for _ in 0..count {
            let at = header_at(&cur);
            let v = cur.number("pixel value").map_err(|e| match e {
                Error::Parse { offset, message } if offset >= bytes.len() => parse_err(
                    offset,
                    format!(
                        "truncated raster: {} of {count} samples ({message})",
                        pixels.len()
                    ),
                ),
                other => other,
            })?;
            if v > maxval {
                return Err(parse_err(at, format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / scale);
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Encode as binary P5 with maxval 255.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(
        image
            .pixels()
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| match e {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn save_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}
