use serde::{Deserialize, Serialize};

use super::{BlockOperator, BlockStructure};
use crate::error::{check_len, invalid, Result};

/// Sparse operator stored column-major: `indptr[j]..indptr[j+1]` indexes the
/// row indices and values of column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseColumnOperator {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    structure: BlockStructure,
}

impl SparseColumnOperator {
    pub fn new(
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
        structure: BlockStructure,
    ) -> Result<Self> {
        check_len("indptr", structure.cols() + 1, indptr.len())?;
        check_len("sparse values", indices.len(), values.len())?;
        if indptr[0] != 0 || *indptr.last().unwrap() != indices.len() {
            return Err(invalid("indptr must start at 0 and end at nnz"));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("indptr must be non-decreasing"));
        }
        if indices.iter().any(|&r| r >= structure.rows()) {
            return Err(invalid("sparse row index out of range"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sparse values must be finite"));
        }
        Ok(Self {
            indptr,
            indices,
            values,
            structure,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
        width: usize,
    ) -> Result<Self> {
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(invalid(format!("triplet ({r}, {c}) outside {rows}x{cols}")));
            }
            per_col[c].push((r, v));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut col in per_col {
            col.sort_by_key(|e| e.0);
            for (r, v) in col {
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(r);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self::new(
            indptr,
            indices,
            values,
            BlockStructure::uniform(rows, cols, width)?,
        )
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl BlockOperator for SparseColumnOperator {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn kind(&self) -> &'static str {
        "sparse"
    }

    fn as_sparse(&self) -> Option<&SparseColumnOperator> {
        Some(self)
    }

    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]) {
        for (k, j) in self.structure.range(i).enumerate() {
            let s = alpha * v[k];
            if s == 0.0 {
                continue;
            }
            for p in self.indptr[j]..self.indptr[j + 1] {
                out[self.indices[p]] += s * self.values[p];
            }
        }
    }

    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        for (k, j) in self.structure.range(i).enumerate() {
            out[k] = (self.indptr[j]..self.indptr[j + 1])
                .map(|p| self.values[p] * y[self.indices[p]])
                .sum();
        }
    }
}
