//! `PUWM` binary matrix format.
//!
//! ```text
//! "PUWM" | 0x01 | q: u64 LE | rows: u32 LE | cols: u32 LE | rows*cols x u32 LE
//! ```

use std::borrow::Cow;
use std::io::{Read, Write};

use super::field::FieldParams;
use super::matrix::Matrix;
use crate::error::{parse, Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"PUWM";
pub const MATRIX_VERSION: u8 = 0x01;
/// Bytes preceding the entries.
pub const MATRIX_HEADER_LEN: usize = 4 + 1 + 8 + 4 + 4;

pub fn puwm_len(rows: usize, cols: usize) -> usize {
    MATRIX_HEADER_LEN + 4 * rows * cols
}

pub fn write_matrix<W: Write>(w: &mut W, m: &Matrix, fp: &FieldParams) -> Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Range("too many rows".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Range("too many cols".into()))?;
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&[MATRIX_VERSION])?;
    w.write_all(&u64::from(fp.modulus()).to_le_bytes())?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    w.write_all(&le_bytes(m.as_slice()))?;
    Ok(())
}

/// Little-endian encoding of `values`, borrowed on little-endian targets.
pub(crate) fn le_bytes(values: &[u32]) -> Cow<'_, [u8]> {
    if cfg!(target_endian = "little") {
        // SAFETY: u32 has no padding and u8 has alignment 1.
        Cow::Borrowed(unsafe { std::slice::from_raw_parts(values.as_ptr().cast::<u8>(), values.len() * 4) })
    } else {
        Cow::Owned(values.iter().flat_map(|v| v.to_le_bytes()).collect())
    }
}

pub fn matrix_to_bytes(m: &Matrix, fp: &FieldParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(puwm_len(m.rows(), m.cols()));
    write_matrix(&mut out, m, fp).expect("writing to a Vec cannot fail");
    out
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => parse(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

/// Reads one matrix, rejecting bad magic/version, composite moduli and
/// entries `>= q`.
pub fn read_matrix<R: Read>(r: &mut R) -> Result<(FieldParams, Matrix)> {
    let mut head = [0u8; MATRIX_HEADER_LEN];
    read_exact(r, &mut head, "matrix header")?;
    if &head[..4] != MATRIX_MAGIC {
        return Err(parse("bad matrix magic"));
    }
    if head[4] != MATRIX_VERSION {
        return Err(parse(format!("unsupported matrix version {}", head[4])));
    }
    let q = u64::from_le_bytes(head[5..13].try_into().unwrap());
    let fp = FieldParams::new(q).map_err(|e| parse(e.to_string()))?;
    let rows = u32::from_le_bytes(head[13..17].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(head[17..21].try_into().unwrap()) as usize;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| parse("matrix dimensions overflow"))?;
    let mut body = Vec::new();
    r.take(len as u64).read_to_end(&mut body)?;
    if body.len() != len {
        return Err(parse("truncated matrix body"));
    }
    let data: Vec<u32> = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = Matrix::from_vec(rows, cols, data, &fp).map_err(|e| parse(e.to_string()))?;
    Ok((fp, m))
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<(FieldParams, Matrix)> {
    let mut cur = bytes;
    let out = read_matrix(&mut cur)?;
    if !cur.is_empty() {
        return Err(parse("trailing bytes after matrix"));
    }
    Ok(out)
}
