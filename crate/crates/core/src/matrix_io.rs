//! Binary complex-matrix files.
//!
//! Layout: magic `WSG1`, `u32` rows, `u32` cols, then `rows * cols` entries
//! in row-major order, each as little-endian `f64` real part followed by
//! little-endian `f64` imaginary part.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

pub const MATRIX_MAGIC: &[u8; 4] = b"WSG1";

pub fn write_matrix<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::InvalidArgument("too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::InvalidArgument("too many cols".into()))?;
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format { what: "matrix file", detail: format!("bad magic {magic:?}") });
    }
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 16];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        data.push(C64::new(re, im));
    }
    CMatrix::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Format { what: "matrix file", detail: e.to_string() })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn save_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<CMatrix> {
    read_matrix(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_layout_is_fixed() {
        let m = CMatrix::from_shape_vec((1, 2), vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)]).unwrap();
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m).unwrap();
        assert_eq!(&bytes[..4], b"WSG1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[20..28], &(-2.0f64).to_le_bytes());
        assert_eq!(&bytes[28..36], &0.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 12 + 2 * 16);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_matrix(&b"XXXX\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &CMatrix::zeros((2, 2))).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_matrix(&bytes[..]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(rows in 0usize..5, cols in 0usize..5, vals in proptest::collection::vec(-1e6f64..1e6, 50)) {
            let m = CMatrix::from_shape_fn((rows, cols), |(i, j)| C64::new(vals[i * 5 + j], vals[25 + i * 5 + j]));
            let mut bytes = Vec::new();
            write_matrix(&mut bytes, &m).unwrap();
            prop_assert_eq!(read_matrix(&bytes[..]).unwrap(), m);
        }
    }
}
