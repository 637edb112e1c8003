//! Binary matrix container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "FADESMAT"                      8-byte magic
//! u32 version                     = 1
//! u32 precision                   0 = int8, 1 = float32
//! u32 layout                      0 = dense row-major, 1 = CSR
//! u32 rows, u32 cols, u32 nnz     nnz = non-zero count (dense: informational, checked)
//! dense: rows*cols elements
//! CSR:   u64 row_ptr[rows+1], u32 col_idx[nnz], nnz elements
//! ```
//!
//! Int8 elements are one signed byte each; floats are IEEE-754 LE.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix, ElementPrecision, Elements};

pub const MAGIC: &[u8; 8] = b"FADESMAT";
pub const VERSION: u32 = 1;

const LAYOUT_DENSE: u32 = 0;
const LAYOUT_CSR: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredMatrix {
    Dense(DenseMatrix),
    Csr(CsrMatrix),
}

impl StoredMatrix {
    pub fn into_dense(self) -> DenseMatrix {
        match self {
            StoredMatrix::Dense(m) => m,
            StoredMatrix::Csr(m) => m.to_dense(),
        }
    }
}

fn header(
    w: &mut impl Write,
    precision: ElementPrecision,
    layout: u32,
    rows: usize,
    cols: usize,
    nnz: usize,
) -> Result<()> {
    w.write_all(MAGIC)?;
    for field in [
        VERSION,
        precision.tag(),
        layout,
        to_u32(rows, "rows")?,
        to_u32(cols, "cols")?,
        to_u32(nnz, "nnz")?,
    ] {
        w.write_all(&field.to_le_bytes())?;
    }
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

fn write_elements(w: &mut impl Write, data: &Elements) -> Result<()> {
    match data {
        Elements::Int8(v) => {
            let bytes: Vec<u8> = v.iter().map(|&x| x as u8).collect();
            w.write_all(&bytes)?;
        }
        Elements::Float32(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_dense(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    header(
        w,
        m.precision(),
        LAYOUT_DENSE,
        m.rows(),
        m.cols(),
        m.count_nonzero(),
    )?;
    write_elements(w, m.data())
}

pub fn write_csr(w: &mut impl Write, m: &CsrMatrix) -> Result<()> {
    header(w, m.precision(), LAYOUT_CSR, m.rows(), m.cols(), m.nnz())?;
    for &p in m.row_ptr() {
        w.write_all(&(p as u64).to_le_bytes())?;
    }
    for &c in m.col_idx() {
        w.write_all(&c.to_le_bytes())?;
    }
    write_elements(w, m.values())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_elements(r: &mut impl Read, precision: ElementPrecision, len: usize) -> Result<Elements> {
    match precision {
        ElementPrecision::Int8 => {
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            Ok(Elements::Int8(bytes.into_iter().map(|b| b as i8).collect()))
        }
        ElementPrecision::Float32 => {
            let mut bytes = vec![0u8; len * 4];
            r.read_exact(&mut bytes)?;
            Ok(Elements::Float32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ))
        }
    }
}

pub fn read_matrix(r: &mut impl Read) -> Result<StoredMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let precision = ElementPrecision::from_tag(read_u32(r)?)?;
    let layout = read_u32(r)?;
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    let nnz = read_u32(r)? as usize;
    match layout {
        LAYOUT_DENSE => {
            let data = read_elements(r, precision, rows * cols)?;
            let m = DenseMatrix::new(rows, cols, data)?;
            if m.count_nonzero() != nnz {
                return Err(Error::Format(format!(
                    "header nnz {nnz} disagrees with payload ({})",
                    m.count_nonzero()
                )));
            }
            Ok(StoredMatrix::Dense(m))
        }
        LAYOUT_CSR => {
            let mut row_ptr = Vec::with_capacity(rows + 1);
            for _ in 0..=rows {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                let p = u64::from_le_bytes(b);
                row_ptr.push(
                    usize::try_from(p).map_err(|_| Error::Format("row_ptr overflow".into()))?,
                );
            }
            let col_idx = (0..nnz).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
            let values = read_elements(r, precision, nnz)?;
            Ok(StoredMatrix::Csr(CsrMatrix::from_parts(
                rows, cols, row_ptr, col_idx, values,
            )?))
        }
        other => Err(Error::Format(format!("unknown layout tag {other}"))),
    }
}

pub fn save_dense(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut buf = Vec::new();
    write_dense(&mut buf, m)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn save_csr(path: impl AsRef<Path>, m: &CsrMatrix) -> Result<()> {
    let mut buf = Vec::new();
    write_csr(&mut buf, m)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<StoredMatrix> {
    let bytes = fs::read(path)?;
    read_matrix(&mut bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::generate_matrix;

    #[test]
    fn dense_header_is_bit_exact() {
        let m = DenseMatrix::from_i8(1, 3, vec![1, 0, -1]).unwrap();
        let mut buf = Vec::new();
        write_dense(&mut buf, &m).unwrap();
        let mut expected = b"FADESMAT".to_vec();
        for f in [1u32, 0, 0, 1, 3, 2] {
            expected.extend_from_slice(&f.to_le_bytes());
        }
        expected.extend_from_slice(&[0x01, 0x00, 0xFF]);
        assert_eq!(buf, expected);
    }

    #[test]
    fn csr_layout_is_bit_exact() {
        let m = DenseMatrix::from_f32(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_csr(&mut buf, &CsrMatrix::from_dense(&m)).unwrap();
        let mut expected = b"FADESMAT".to_vec();
        for f in [1u32, 1, 1, 2, 2, 1] {
            expected.extend_from_slice(&f.to_le_bytes());
        }
        for p in [0u64, 1, 1] {
            expected.extend_from_slice(&p.to_le_bytes());
        }
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn round_trips_both_layouts() {
        for precision in [ElementPrecision::Int8, ElementPrecision::Float32] {
            let m = generate_matrix(9, 13, precision, 0.6, 1).unwrap();
            let mut buf = Vec::new();
            write_dense(&mut buf, &m).unwrap();
            assert_eq!(
                read_matrix(&mut buf.as_slice()).unwrap(),
                StoredMatrix::Dense(m.clone())
            );

            let csr = CsrMatrix::from_dense(&m);
            let mut buf = Vec::new();
            write_csr(&mut buf, &csr).unwrap();
            assert_eq!(
                read_matrix(&mut buf.as_slice()).unwrap(),
                StoredMatrix::Csr(csr)
            );
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let m = DenseMatrix::from_i8(1, 2, vec![1, 2]).unwrap();
        let mut buf = Vec::new();
        write_dense(&mut buf, &m).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_matrix(&mut bad_magic.as_slice()).is_err());

        let mut bad_nnz = buf.clone();
        bad_nnz[28] = 7;
        assert!(read_matrix(&mut bad_nnz.as_slice()).is_err());

        let truncated = &buf[..buf.len() - 1];
        assert!(matches!(
            read_matrix(&mut &truncated[..]),
            Err(Error::Io(_))
        ));
    }
}
