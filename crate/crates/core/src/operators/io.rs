//! On-disk operator dumps.
//!
//! Every file starts with an 8-byte header: `m` and `n` as little-endian
//! `u32`. Payloads are little-endian.
//!
//! - dense: header, then `m * n` `f64` entries in column-major order;
//! - sparse: three files sharing one stem, `<stem>.indptr` (`n + 1` `u64`),
//!   `<stem>.indices` (`nnz` `u64` row indices) and `<stem>.values`
//!   (`nnz` `f64`), each with the header;
//! - vectors: header with `n = 1`, then the entries.

use std::fs;
use std::path::{Path, PathBuf};

use super::{BlockOperator, BlockStructure, DenseOperator, SparseColumnOperator};
use crate::error::{invalid, Result};

fn header(m: usize, n: usize) -> Result<Vec<u8>> {
    let m = u32::try_from(m).map_err(|_| invalid("row count exceeds u32"))?;
    let n = u32::try_from(n).map_err(|_| invalid("column count exceeds u32"))?;
    let mut out = Vec::with_capacity(8);
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    Ok(out)
}

fn split_header(bytes: &[u8]) -> Result<((usize, usize), &[u8])> {
    if bytes.len() < 8 {
        return Err(invalid("file shorter than its 8-byte header"));
    }
    let m = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    Ok(((m, n), &bytes[8..]))
}

fn words(payload: &[u8]) -> Result<impl Iterator<Item = [u8; 8]> + '_> {
    if payload.len() % 8 != 0 {
        return Err(invalid("payload is not a whole number of 8-byte words"));
    }
    Ok(payload.chunks_exact(8).map(|c| c.try_into().unwrap()))
}

pub fn encode_dense(op: &DenseOperator) -> Result<Vec<u8>> {
    let (m, n) = (op.structure().rows(), op.structure().cols());
    let mut out = header(m, n)?;
    out.reserve(8 * m * n);
    for v in op.col_major() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a dense dump; `width` sets the block partition.
pub fn decode_dense(bytes: &[u8], width: usize) -> Result<DenseOperator> {
    let ((m, n), payload) = split_header(bytes)?;
    let col_major: Vec<f64> = words(payload)?.map(f64::from_le_bytes).collect();
    if col_major.len() != m * n {
        return Err(invalid(format!(
            "dense payload has {} entries, header says {m}x{n}",
            col_major.len()
        )));
    }
    DenseOperator::new(m, n, col_major, BlockStructure::uniform(m, n, width)?)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = header(v.len(), 1)?;
    out.reserve(8 * v.len());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    let ((m, n), payload) = split_header(&bytes)?;
    let v: Vec<f64> = words(payload)?.map(f64::from_le_bytes).collect();
    if n != 1 || v.len() != m {
        return Err(invalid(format!("vector file holds {} entries, header says {m}x{n}", v.len())));
    }
    Ok(v)
}

pub fn write_dense(path: &Path, op: &DenseOperator) -> Result<()> {
    fs::write(path, encode_dense(op)?)?;
    Ok(())
}

pub fn read_dense(path: &Path, width: usize) -> Result<DenseOperator> {
    decode_dense(&fs::read(path)?, width)
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<stem>.indptr`, `<stem>.indices`, `<stem>.values`.
pub fn write_sparse(stem: &Path, op: &SparseColumnOperator) -> Result<()> {
    let s = op.structure();
    let h = header(s.rows(), s.cols())?;
    let mut indptr = h.clone();
    for &p in op.indptr() {
        indptr.extend_from_slice(&(p as u64).to_le_bytes());
    }
    let mut indices = h.clone();
    for &r in op.indices() {
        indices.extend_from_slice(&(r as u64).to_le_bytes());
    }
    let mut values = h;
    for &v in op.values() {
        values.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(with_ext(stem, "indptr"), indptr)?;
    fs::write(with_ext(stem, "indices"), indices)?;
    fs::write(with_ext(stem, "values"), values)?;
    Ok(())
}

pub fn read_sparse(stem: &Path, width: usize) -> Result<SparseColumnOperator> {
    let read = |ext: &str| fs::read(with_ext(stem, ext));
    let (indptr_bytes, indices_bytes, values_bytes) = (read("indptr")?, read("indices")?, read("values")?);
    let (dims, p) = split_header(&indptr_bytes)?;
    let (dims_i, ix) = split_header(&indices_bytes)?;
    let (dims_v, vs) = split_header(&values_bytes)?;
    if dims != dims_i || dims != dims_v {
        return Err(invalid("sparse triplet files disagree on dimensions"));
    }
    let indptr = words(p)?.map(|w| u64::from_le_bytes(w) as usize).collect();
    let indices = words(ix)?.map(|w| u64::from_le_bytes(w) as usize).collect();
    let values = words(vs)?.map(f64::from_le_bytes).collect();
    SparseColumnOperator::new(
        indptr,
        indices,
        values,
        BlockStructure::uniform(dims.0, dims.1, width)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::BlockOperator;

    #[test]
    fn dense_layout_is_column_major_with_header() {
        let op = DenseOperator::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0], 1).unwrap();
        let bytes = encode_dense(&op).unwrap();
        assert_eq!(bytes.len(), 8 + 4 * 8);
        assert_eq!(&bytes[0..4], &2u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3.0f64.to_le_bytes());
        assert_eq!(decode_dense(&bytes, 1).unwrap(), op);
    }

    #[test]
    fn truncated_dense_is_rejected() {
        let op = DenseOperator::from_row_major(1, 2, vec![1.0, 2.0], 1).unwrap();
        let bytes = encode_dense(&op).unwrap();
        assert!(decode_dense(&bytes[..bytes.len() - 8], 1).is_err());
        assert!(decode_dense(&bytes[..4], 1).is_err());
    }

    #[test]
    fn sparse_roundtrip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let op = SparseColumnOperator::from_triplets(3, 2, &[(0, 0, 1.5), (2, 1, -2.0)], 1).unwrap();
        let stem = dir.path().join("a");
        write_sparse(&stem, &op).unwrap();
        let back = read_sparse(&stem, 1).unwrap();
        assert_eq!(back, op);
        assert_eq!(back.apply(&[1.0, 1.0]).unwrap(), vec![1.5, 0.0, -2.0]);
    }

    #[test]
    fn vector_roundtrip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        write_vector(&path, &[1.0, -0.5, 3.25]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[0..8], &[3, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(read_vector(&path).unwrap(), vec![1.0, -0.5, 3.25]);
    }
}
