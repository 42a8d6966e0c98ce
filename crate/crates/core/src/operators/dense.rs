use serde::{Deserialize, Serialize};

use super::{BlockOperator, BlockStructure};
use crate::error::{check_len, invalid, Result};
use crate::linalg::{axpy, dot, Matrix};

/// Dense operator stored column-major, so every block is one contiguous
/// slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    structure: BlockStructure,
}

impl DenseOperator {
    /// `data` is column-major.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, structure: BlockStructure) -> Result<Self> {
        check_len("dense buffer", rows * cols, data.len())?;
        check_len("structure rows", rows, structure.rows())?;
        check_len("structure columns", cols, structure.cols())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(invalid("dense operator entries must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            data,
            structure,
        })
    }

    /// Row-major data with uniform blocks of `width` columns.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>, width: usize) -> Result<Self> {
        check_len("dense buffer", rows * cols, data.len())?;
        let mut col_major = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                col_major[c * rows + r] = data[r * cols + c];
            }
        }
        Self::new(rows, cols, col_major, BlockStructure::uniform(rows, cols, width)?)
    }

    pub fn from_matrix(m: &Matrix, width: usize) -> Result<Self> {
        Self::new(
            m.rows(),
            m.cols(),
            m.as_slice().to_vec(),
            BlockStructure::uniform(m.rows(), m.cols(), width)?,
        )
    }

    /// Same matrix, different column partition.
    pub fn reblocked(&self, structure: BlockStructure) -> Result<Self> {
        Self::new(self.rows, self.cols, self.data.clone(), structure)
    }

    pub fn col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for c in 0..self.cols {
            for r in 0..self.rows {
                out[r * self.cols + c] = self.data[c * self.rows + r];
            }
        }
        out
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_col_major(self.rows, self.cols, self.data.clone())
    }

    fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }
}

impl BlockOperator for DenseOperator {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn kind(&self) -> &'static str {
        "dense"
    }

    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]) {
        for (k, c) in self.structure.range(i).enumerate() {
            let s = alpha * v[k];
            if s != 0.0 {
                axpy(s, self.column(c), out);
            }
        }
    }

    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.structure.range(i)) {
            *o = dot(self.column(c), y);
        }
    }

    fn apply_add(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        for (c, &xc) in x.iter().enumerate() {
            if xc != 0.0 {
                axpy(alpha * xc, self.column(c), out);
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(self.column(c), y);
        }
    }

    fn to_dense(&self) -> DenseOperator {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> DenseOperator {
        DenseOperator::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0], 1).unwrap()
    }

    #[test]
    fn diagonal_apply() {
        let a = DenseOperator::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 2.0], 2).unwrap();
        assert_eq!(a.apply(&[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
    }

    #[test]
    fn column_extraction() {
        let a = two_by_two();
        assert_eq!(a.apply_block(1, &[1.0]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(a.apply_block(0, &[0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(a.adjoint_apply_block(0, &[1.0, 1.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn row_and_column_major_agree() {
        let a = two_by_two();
        assert_eq!(a.col_major(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(a.row_major(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.entry(0, 1), 2.0);
        assert_eq!(a.to_matrix().col(1), &[2.0, 4.0]);
    }

    #[test]
    fn single_column_norm_is_exact() {
        let a = DenseOperator::from_row_major(2, 1, vec![3.0, 4.0], 1).unwrap();
        assert_eq!(a.block_sq_norm(0).unwrap(), 25.0);
    }

    #[test]
    fn identity_block_norm_is_one() {
        let a = DenseOperator::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert!((a.block_sq_norm(0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_block_has_zero_norm() {
        let a = DenseOperator::from_row_major(2, 3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(a.block_sq_norm(0).unwrap(), 0.0);
    }
}
