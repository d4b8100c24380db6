//! Portable graymap reading and writing (P2 plain, P5 raw, maxval ≤ 255).

use std::path::Path;

use raqsim_core::entropy::GrayImage;

use crate::error::{Result, SimError};

const WHAT: &str = "pgm";

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(SimError::parse(WHAT, 0, "unexpected end of file"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| SimError::parse(WHAT, 0, "non-ASCII header"))
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| SimError::parse(WHAT, 0, format!("bad number `{t}`")))
    }
}

/// Decodes a PGM; the image gets `maxval + 1` gray levels.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    let mut h = Header { bytes, pos: 0 };
    let magic = h.token()?.to_string();
    let raw = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(SimError::parse(
                WHAT,
                0,
                format!("unsupported magic `{other}`"),
            ))
        }
    };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(SimError::parse(
            WHAT,
            0,
            format!("maxval {maxval} outside 1..=255"),
        ));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if raw {
        let start = h.pos + 1;
        let data = bytes
            .get(start..start + n)
            .ok_or_else(|| SimError::parse(WHAT, 0, "truncated raster"))?;
        pixels.extend(data.iter().map(|&b| u16::from(b)));
    } else {
        for _ in 0..n {
            pixels.push(h.number()? as u16);
        }
    }
    if let Some(&p) = pixels.iter().find(|&&p| usize::from(p) > maxval) {
        return Err(SimError::parse(
            WHAT,
            0,
            format!("sample {p} exceeds maxval {maxval}"),
        ));
    }
    Ok(GrayImage::new(height, width, (maxval + 1) as u16, pixels)?)
}

/// Raw (P5) encoding; requires at most 256 levels.
pub fn encode(img: &GrayImage) -> Result<Vec<u8>> {
    if img.levels() > 256 || img.levels() < 2 {
        return Err(SimError::Dataset(format!(
            "{} levels cannot be stored as 8-bit PGM",
            img.levels()
        )));
    }
    let mut out = format!(
        "P5\n{} {}\n{}\n",
        img.width(),
        img.height(),
        img.levels() - 1
    )
    .into_bytes();
    out.extend(img.pixels().iter().map(|&p| p as u8));
    Ok(out)
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| SimError::io(path, e))?;
    decode(&bytes)
}

pub fn write(path: &Path, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode(img)?).map_err(|e| SimError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_with_comments() {
        let img = decode(b"P2\n# note\n3 2\n# another\n15\n0 1 2\n3 4 15\n").unwrap();
        assert_eq!((img.height(), img.width(), img.levels()), (2, 3, 16));
        assert_eq!(img.pixels(), &[0, 1, 2, 3, 4, 15]);
    }

    #[test]
    fn raw_roundtrip() {
        let img = GrayImage::new(2, 2, 256, vec![0, 128, 255, 7]).unwrap();
        assert_eq!(decode(&encode(&img).unwrap()).unwrap(), img);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(decode(b"P2\n1 1\n65535\n0\n").is_err());
        assert!(decode(b"P2\n2 1\n3\n0 9\n").is_err());
        assert!(decode(b"P5\n4 4\n255\n\0").is_err());
    }
}
