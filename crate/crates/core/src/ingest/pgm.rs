//! Binary PGM (`P5`, maxval 255) reading and writing.

use std::path::Path;

use crate::error::{Error, Result};

use super::{ActivationRaster, SegmentationRaster, IGNORE, NUM_CATEGORIES};

/// A decoded 8-bit gray image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
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

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("missing {what} in PGM header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("invalid {what} in PGM header"))
    }
}

/// Decodes a binary PGM. Header comments are skipped.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (expected magic P5)".to_string());
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("invalid dimensions {width}x{height}"));
    }
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval} (expected 255)"));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err("truncated PGM header".to_string()),
    }
    let len = width
        .checked_mul(height)
        .ok_or_else(|| format!("dimensions {width}x{height} overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < len {
        return Err(format!(
            "truncated payload: {} of {} bytes",
            payload.len(),
            len
        ));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: payload[..len].to_vec(),
    })
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|message| Error::Raster {
        path: path.to_path_buf(),
        message,
    })
}

/// Loads a segmentation raster; byte values are category ids, 255 is IGNORE.
pub fn load_label_raster(path: &Path) -> Result<SegmentationRaster> {
    let img = read_gray(path)?;
    if let Some(&bad) = img
        .pixels
        .iter()
        .find(|&&v| v as usize >= NUM_CATEGORIES && v != IGNORE)
    {
        return Err(Error::Raster {
            path: path.to_path_buf(),
            message: format!("invalid category id {bad}"),
        });
    }
    SegmentationRaster::new(img.width, img.height, img.pixels)
}

/// Loads an activation raster as `byte / 255`.
pub fn load_activation_raster(path: &Path) -> Result<ActivationRaster> {
    let img = read_gray(path)?;
    ActivationRaster::from_bytes(img.width, img.height, &img.pixels)
}
