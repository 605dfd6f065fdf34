//! Binary PGM (P5) reader and writer.
//!
//! Only the binary variant with a maxval of at most 255 is supported, which
//! is what the frame recorder emits. The parser is meant to survive
//! arbitrary bytes: dimensions are validated before any allocation and the
//! payload length must match the header exactly.

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Parses a binary PGM image.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(2)?;
    if magic != b"P5" {
        return Err(Error::InvalidInput("not a binary PGM: missing P5 magic".into()));
    }
    let width = cur.read_header_number()?;
    let height = cur.read_header_number()?;
    let maxval = cur.read_header_number()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::InvalidInput(format!(
            "unsupported maxval {maxval}: only single-byte samples are handled"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let sep = cur.take(1)?;
    if !sep[0].is_ascii_whitespace() {
        return Err(Error::InvalidInput("missing whitespace after maxval".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("image dimensions must be positive".into()));
    }
    let need = (width as u64).checked_mul(height as u64).ok_or_else(|| {
        Error::InvalidInput("image dimensions overflow".into())
    })?;
    let rest = &cur.bytes[cur.pos..];
    if (rest.len() as u64) < need {
        return Err(Error::InvalidInput(format!(
            "raster truncated: header promises {need} bytes, {} remain",
            rest.len()
        )));
    }
    if (rest.len() as u64) > need {
        return Err(Error::InvalidInput(format!(
            "trailing bytes after raster: expected {need}, found {}",
            rest.len()
        )));
    }
    let (w, h) = (width as u32, height as u32);
    GrayImage::from_raw(w, h, rest.to_vec())
}

/// Encodes an image as binary PGM with maxval 255.
pub fn encode(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::InvalidInput("unexpected end of PGM header".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_whitespace_and_comments(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(b) = self.peek() {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(Error::InvalidInput("unexpected end of PGM header".into())),
            }
        }
    }

    fn read_header_number(&mut self) -> Result<u64> {
        self.skip_whitespace_and_comments()?;
        let mut value: u64 = 0;
        let mut digits = 0usize;
        while let Some(b) = self.peek() {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u64))
                .ok_or_else(|| Error::InvalidInput("header number overflows".into()))?;
            digits += 1;
            self.pos += 1;
        }
        if digits == 0 {
            return Err(Error::InvalidInput("expected a number in PGM header".into()));
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_pixel() {
        let mut img = GrayImage::new(7, 5, 0).unwrap();
        for y in 0..5 {
            for x in 0..7 {
                img.set(x, y, (x * 37 + y * 11) as u8);
            }
        }
        let bytes = encode(&img);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# recorded frame\n2 2\n255\n\x01\x02\x03\x04";
        let img = decode(bytes).unwrap();
        assert_eq!(img.pixels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let bytes = b"P5\n4 4\n255\nshort";
        let err = decode(bytes).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let bytes = b"P5\n1 1\n255\nab";
        assert!(decode(bytes).is_err());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"").is_err());
    }

    #[test]
    fn huge_dimensions_fail_before_allocating() {
        let bytes = b"P5\n99999999 99999999\n255\n\x00";
        assert!(decode(bytes).is_err());
    }

    #[test]
    fn sixteen_bit_maxval_is_unsupported() {
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode(b"P5\n1 1\n0\n\x00").is_err());
    }
}
