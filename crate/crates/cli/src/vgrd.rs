//! `VGRD1` voxel grid files: the magic `VGRD0001`, little-endian `u32`
//! `nx ny nz`, `f64` voxel size, then `nx·ny·nz` `f32` values, x-fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use fld_core::{GridDims, ScalarField};

use crate::error::FormatError;

pub const MAGIC: &[u8; 8] = b"VGRD0001";
const HEADER_LEN: usize = 8 + 3 * 4 + 8;

pub fn write_vgrd<W: Write>(mut w: W, field: &ScalarField) -> Result<(), FormatError> {
    let d = field.dims();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    for n in [d.nx, d.ny, d.nz] {
        let n = u32::try_from(n).map_err(|_| FormatError::Invalid(format!("axis length {n} exceeds u32")))?;
        header.extend_from_slice(&n.to_le_bytes());
    }
    header.extend_from_slice(&d.dl.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(4 * field.data().len());
    for &v in field.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_vgrd<R: Read>(mut r: R) -> Result<ScalarField, FormatError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(truncated)?;
    if &header[..8] != MAGIC {
        return Err(FormatError::BadMagic("VGRD0001"));
    }
    let axis = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap()) as usize;
    let (nx, ny, nz) = (axis(8), axis(12), axis(16));
    let dl = f64::from_le_bytes(header[20..28].try_into().unwrap());
    let dims = GridDims::new(nx, ny, nz, dl)?;
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| FormatError::Invalid("grid too large".into()))?;
    let mut bytes = vec![0u8; n];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(FormatError::Invalid("trailing bytes after grid data".into()));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(ScalarField::from_vec(dims, data)?)
}

fn truncated(e: std::io::Error) -> FormatError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        FormatError::Truncated
    } else {
        FormatError::Io(e)
    }
}

pub fn save(path: &Path, field: &ScalarField) -> Result<(), FormatError> {
    write_vgrd(BufWriter::new(File::create(path)?), field)
}

pub fn load(path: &Path) -> Result<ScalarField, FormatError> {
    read_vgrd(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let d = GridDims::new(3, 4, 5, 0.25).unwrap();
        let mut out = Vec::new();
        write_vgrd(&mut out, &ScalarField::constant(d, 1.5)).unwrap();
        assert_eq!(out.len(), HEADER_LEN + 4 * 60);
        assert_eq!(&out[..8], b"VGRD0001");
        assert_eq!(&out[8..12], &3u32.to_le_bytes());
        assert_eq!(&out[16..20], &5u32.to_le_bytes());
        assert_eq!(&out[20..28], &0.25f64.to_le_bytes());
        assert_eq!(&out[28..32], &1.5f32.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(matches!(read_vgrd(&b"VGRD0002"[..]), Err(FormatError::Truncated)));
        let mut bad = vec![0u8; HEADER_LEN];
        bad[..8].copy_from_slice(b"XGRD0001");
        assert!(matches!(read_vgrd(&bad[..]), Err(FormatError::BadMagic(_))));
        let d = GridDims::cube(3, 1.0).unwrap();
        let mut out = Vec::new();
        write_vgrd(&mut out, &ScalarField::zeros(d)).unwrap();
        assert!(matches!(read_vgrd(&out[..out.len() - 1]), Err(FormatError::Truncated)));
        out.push(0);
        assert!(read_vgrd(&out[..]).is_err());
    }
}
