//! Binary PGM (P5) / PPM (P6) images and PGM ground-truth masks.

use std::path::Path;

use super::maps::{Mask, MaskClass, RgbImage, ScalarMap};
use crate::error::{Error, Result};

pub const MASK_STATIC: u8 = 0;
pub const MASK_DONT_CARE: u8 = 128;
pub const MASK_DYNAMIC: u8 = 255;

/// Raw decoded netpbm raster. `channels` is 1 for P5 and 3 for P6.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_int(&mut self, name: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start as u64, format!("expected {name}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(start as u64, format!("{name} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Raster> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::format(0, "expected P5 or P6 magic")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_int("width")?;
    let height = cur.header_int("height")?;
    let maxval = cur.header_int("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(2, "empty dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(cur.pos as u64, format!("bad maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format(cur.pos as u64, "missing raster separator"));
    }
    cur.pos += 1;
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let count = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format(2, "dimension overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < count * bytes_per_sample {
        return Err(Error::format(bytes.len() as u64, "truncated raster"));
    }
    let samples = if bytes_per_sample == 1 {
        raster[..count].iter().map(|&b| b as u16).collect()
    } else {
        raster[..count * 2]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Raster {
        height,
        width,
        channels,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode_pgm(height: usize, width: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn encode_ppm(height: usize, width: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a P5 or P6 file as an RGB image scaled to `[0, 1]`. Grayscale input
/// is replicated into all three channels.
pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let raster = decode_pnm(&read_file(path.as_ref())?)?;
    let maxval = raster.maxval as f32;
    let (h, w, c) = (raster.height, raster.width, raster.channels);
    let channel = |k: usize| {
        ScalarMap::new(
            h,
            w,
            raster.samples[k.min(c - 1)..]
                .iter()
                .step_by(c)
                .map(|&s| s as f32 / maxval)
                .collect(),
        )
    };
    RgbImage::new(channel(0)?, channel(1)?, channel(2)?)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ppm(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let mut samples = Vec::with_capacity(image.r.len() * 3);
    for i in 0..image.r.len() {
        samples.push(quantize(image.r.data()[i]));
        samples.push(quantize(image.g.data()[i]));
        samples.push(quantize(image.b.data()[i]));
    }
    write_file(
        path.as_ref(),
        &encode_ppm(image.height(), image.width(), &samples),
    )
}

/// Writes a `[0, 1]` map as an 8-bit PGM (values clamped and rounded).
pub fn write_pgm8(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let samples: Vec<u8> = map.data().iter().map(|&v| quantize(v)).collect();
    write_file(
        path.as_ref(),
        &encode_pgm(map.height(), map.width(), &samples),
    )
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let raster = decode_pnm(bytes)?;
    if raster.channels != 1 || raster.maxval != 255 {
        return Err(Error::format(
            0,
            "mask must be an 8-bit P5 image with maxval 255",
        ));
    }
    let data = raster
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| match s as u8 {
            MASK_STATIC => Ok(MaskClass::Static),
            MASK_DYNAMIC => Ok(MaskClass::Dynamic),
            MASK_DONT_CARE => Ok(MaskClass::DontCare),
            other => Err(Error::InvalidInput(format!(
                "mask pixel {i} has value {other}; expected 0, 128 or 255"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::new(raster.height, raster.width, data)
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let samples: Vec<u8> = mask
        .data()
        .iter()
        .map(|c| match c {
            MaskClass::Static => MASK_STATIC,
            MaskClass::Dynamic => MASK_DYNAMIC,
            MaskClass::DontCare => MASK_DONT_CARE,
        })
        .collect();
    encode_pgm(mask.height(), mask.width(), &samples)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask(mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_codes() {
        let mask = Mask::new(
            1,
            3,
            vec![MaskClass::Static, MaskClass::Dynamic, MaskClass::DontCare],
        )
        .unwrap();
        let bytes = encode_mask(&mask);
        assert!(bytes.ends_with(&[0, 255, 128]));
        assert_eq!(decode_mask(&bytes).unwrap(), mask);
    }

    #[test]
    fn mask_rejects_other_values() {
        let bytes = encode_pgm(1, 2, &[0, 7]);
        assert!(decode_mask(&bytes).is_err());
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# max\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20]);
        let r = decode_pnm(&bytes).unwrap();
        assert_eq!((r.height, r.width, r.channels), (1, 2, 1));
        assert_eq!(r.samples, vec![10, 20]);
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let mut bytes = b"P5 1 1 1000\n".to_vec();
        bytes.extend_from_slice(&500u16.to_be_bytes());
        let r = decode_pnm(&bytes).unwrap();
        assert_eq!(r.samples, vec![500]);
    }

    #[test]
    fn truncated_raster() {
        let bytes = b"P6 2 2 255\n\x00\x01\x02".to_vec();
        assert!(matches!(decode_pnm(&bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let r = ScalarMap::new(1, 2, vec![0.0, 1.0]).unwrap();
        let g = ScalarMap::new(1, 2, vec![128.0 / 255.0, 0.0]).unwrap();
        let b = ScalarMap::new(1, 2, vec![1.0, 64.0 / 255.0]).unwrap();
        let img = RgbImage::new(r, g, b).unwrap();
        write_ppm(&img, &path).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
    }
}
