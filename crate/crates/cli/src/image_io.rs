//! PFM (little-endian float RGB) and binary PPM (P6) images.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use fld_core::raymarch::{HdrImage, LdrImage};

use crate::error::FormatError;

/// Writes `PF`, scale `-1.0`, rows bottom-to-top.
pub fn write_pfm<W: Write>(mut w: W, img: &HdrImage) -> Result<(), FormatError> {
    write!(w, "PF\n{} {}\n-1.0\n", img.width, img.height)?;
    let mut buf = Vec::with_capacity(12 * img.pixels.len());
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            for v in img.get(x, y) {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String, FormatError> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return if tok.is_empty() {
                Err(FormatError::Truncated)
            } else {
                Ok(String::from_utf8_lossy(&tok).into_owned())
            };
        }
        if byte[0].is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(String::from_utf8_lossy(&tok).into_owned());
            }
        } else {
            tok.push(byte[0]);
        }
    }
}

fn parse<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T, FormatError> {
    tok.parse()
        .map_err(|_| FormatError::Invalid(format!("bad {what} '{tok}' in image header")))
}

/// Reads a color PFM of either byte order.
pub fn read_pfm<R: Read>(r: R) -> Result<HdrImage, FormatError> {
    let mut r = BufReader::new(r);
    if header_token(&mut r)? != "PF" {
        return Err(FormatError::BadMagic("PF"));
    }
    let width: usize = parse(&header_token(&mut r)?, "width")?;
    let height: usize = parse(&header_token(&mut r)?, "height")?;
    let scale: f64 = parse(&header_token(&mut r)?, "scale")?;
    let mut bytes = vec![0u8; 12 * width * height];
    r.read_exact(&mut bytes).map_err(|_| FormatError::Truncated)?;
    let value = |c: &[u8]| {
        let b: [u8; 4] = c.try_into().unwrap();
        if scale < 0.0 {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    };
    let mut pixels = vec![[0.0; 3]; width * height];
    for (row, chunk) in bytes.chunks_exact(12 * width.max(1)).enumerate().take(height) {
        let y = height - 1 - row;
        for x in 0..width {
            let p = &chunk[12 * x..12 * x + 12];
            pixels[y * width + x] = [value(&p[0..4]) as f64, value(&p[4..8]) as f64, value(&p[8..12]) as f64];
        }
    }
    Ok(HdrImage::from_pixels(width, height, pixels)?)
}

pub fn write_ppm<W: Write>(mut w: W, img: &LdrImage) -> Result<(), FormatError> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.data)?;
    w.flush()?;
    Ok(())
}

pub fn read_ppm<R: Read>(r: R) -> Result<LdrImage, FormatError> {
    let mut r = BufReader::new(r);
    if header_token(&mut r)? != "P6" {
        return Err(FormatError::BadMagic("P6"));
    }
    let width: usize = parse(&header_token(&mut r)?, "width")?;
    let height: usize = parse(&header_token(&mut r)?, "height")?;
    let maxval: u32 = parse(&header_token(&mut r)?, "maxval")?;
    if maxval != 255 {
        return Err(FormatError::Invalid(format!("unsupported maxval {maxval}")));
    }
    let mut data = vec![0u8; 3 * width * height];
    r.read_exact(&mut data).map_err(|_| FormatError::Truncated)?;
    Ok(LdrImage { width, height, data })
}

pub fn save_pfm(path: &Path, img: &HdrImage) -> Result<(), FormatError> {
    write_pfm(BufWriter::new(File::create(path)?), img)
}

pub fn load_pfm(path: &Path) -> Result<HdrImage, FormatError> {
    read_pfm(File::open(path)?)
}

pub fn save_ppm(path: &Path, img: &LdrImage) -> Result<(), FormatError> {
    write_ppm(BufWriter::new(File::create(path)?), img)
}
