//! Binary SSM container: little-endian `u32 N`, `u32 M`, `N × u32` row
//! counts, then `N·M` row-major `f32` values.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::SimilarityMatrix;
use crate::error::{Error, Result};

pub fn write_ssm_dump(ssm: &SimilarityMatrix, path: &Path) -> Result<()> {
    let (n, m) = ssm.values.dim();
    let mut buf = Vec::with_capacity(8 + 4 * n + 4 * n * m);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(m as u32).to_le_bytes());
    for &c in &ssm.row_counts {
        buf.extend_from_slice(&(c as u32).to_le_bytes());
    }
    for v in ssm.values.iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    crate::model::write_atomic(path, &buf)
}

pub fn read_ssm_dump(path: &Path) -> Result<SimilarityMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let word = |k: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * k..4 * k + 4)
            .map(|b| b.try_into().unwrap())
            .ok_or_else(|| Error::Shape(format!("{}: truncated ssm dump", path.display())))
    };
    let n = u32::from_le_bytes(word(0)?) as usize;
    let m = u32::from_le_bytes(word(1)?) as usize;
    if bytes.len() != 4 * (2 + n + n * m) {
        return Err(Error::Shape(format!(
            "{}: expected {} bytes for {n}x{m}, found {}",
            path.display(),
            4 * (2 + n + n * m),
            bytes.len()
        )));
    }
    let row_counts = (0..n)
        .map(|i| word(2 + i).map(|w| u32::from_le_bytes(w) as usize))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..n * m)
        .map(|k| word(2 + n + k).map(|w| f32::from_le_bytes(w) as f64))
        .collect::<Result<Vec<_>>>()?;
    let values = Array2::from_shape_vec((n, m), values).map_err(|e| Error::Shape(e.to_string()))?;
    SimilarityMatrix::new(values, row_counts)
}
