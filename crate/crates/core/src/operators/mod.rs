//! Block-structured linear operators.
//!
//! An operator `A: R^n -> R^m` is split by columns into `p` blocks
//! `A = [A_0, .., A_{p-1}]`. Coordinate methods only ever touch one block at
//! a time, so the trait is built around the per-block products `A_i v` and
//! `A_i^T y`; whole-operator products default to looping over the blocks.
//!
//! Block indices are zero-based throughout the crate.

mod dense;
pub mod io;
mod sparse;
mod structured;

pub use dense::DenseOperator;
pub use sparse::SparseColumnOperator;
pub use structured::{dct_entry, hcat, HcatOperator, IdentityOperator, LowRankOperator, SampledDctOperator};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng::CounterRng;

/// Relative tolerance of the power iteration used for block norms.
pub const POWER_TOL: f64 = 1e-8;
/// Iteration cap of the power iteration used for block norms.
pub const POWER_MAX_ITERS: usize = 5000;
const POWER_SEED: u64 = 0x5EED_B10C_0000_0001;

/// Column partition of an `m x n` operator into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    rows: usize,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn from_widths(rows: usize, widths: &[usize]) -> Result<Self> {
        if widths.is_empty() {
            return Err(invalid("block structure needs at least one block"));
        }
        if widths.contains(&0) {
            return Err(invalid("block widths must be positive"));
        }
        let mut offsets = Vec::with_capacity(widths.len() + 1);
        offsets.push(0);
        for w in widths {
            offsets.push(offsets.last().unwrap() + w);
        }
        Ok(Self { rows, offsets })
    }

    /// Blocks of width `width`; the last block is truncated when `width`
    /// does not divide `cols`.
    pub fn uniform(rows: usize, cols: usize, width: usize) -> Result<Self> {
        if width == 0 || cols == 0 {
            return Err(invalid("uniform blocks need positive width and column count"));
        }
        let widths: Vec<usize> = (0..cols)
            .step_by(width)
            .map(|start| width.min(cols - start))
            .collect();
        Self::from_widths(rows, &widths)
    }

    pub fn single(rows: usize, cols: usize) -> Result<Self> {
        Self::from_widths(rows, &[cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn width(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn widths(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn check_block(&self, i: usize) -> Result<()> {
        if i < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::BlockOutOfRange {
                index: i,
                count: self.num_blocks(),
            })
        }
    }

    /// Appends blocks of the given widths; row count is unchanged.
    pub(crate) fn extended(&self, tail_widths: &[usize]) -> Result<Self> {
        let mut widths = self.widths();
        widths.extend_from_slice(tail_widths);
        Self::from_widths(self.rows, &widths)
    }
}

/// Per-block spectral quantities `lambda_i = lambda_max(A_i^T A_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNorms {
    pub lambda: Vec<f64>,
    pub tolerance: f64,
}

/// Column-blocked linear operator.
///
/// Implementors provide the two unchecked per-block kernels; callers go
/// through the checked provided methods. Operators are immutable after
/// construction.
pub trait BlockOperator: Send + Sync + std::fmt::Debug {
    fn structure(&self) -> &BlockStructure;

    /// `out += alpha * A_i v`. Dimensions are the caller's responsibility.
    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]);

    /// `out = A_i^T y`. Dimensions are the caller's responsibility.
    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]);

    /// Short family name, used in labels and dumps.
    fn kind(&self) -> &'static str;

    /// `out += alpha * A x`
    fn apply_add(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        let s = self.structure();
        for i in 0..s.num_blocks() {
            self.block_apply_add(i, &x[s.range(i)], alpha, out);
        }
    }

    /// `out = A^T y`
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let s = self.structure();
        for i in 0..s.num_blocks() {
            self.block_adjoint_into(i, y, &mut out[s.range(i)]);
        }
    }

    /// Concrete sparse storage, for dumps.
    fn as_sparse(&self) -> Option<&SparseColumnOperator> {
        None
    }

    /// Closed-form `lambda_i` when the family knows it.
    fn known_block_sq_norm(&self, _i: usize) -> Option<f64> {
        None
    }

    fn rows(&self) -> usize {
        self.structure().rows()
    }

    fn cols(&self) -> usize {
        self.structure().cols()
    }

    fn num_blocks(&self) -> usize {
        self.structure().num_blocks()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply input", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply_add(x, 1.0, &mut out);
        Ok(out)
    }

    fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint input", self.rows(), y.len())?;
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }

    fn apply_block(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        let s = self.structure();
        s.check_block(i)?;
        check_len("block input", s.width(i), v.len())?;
        let mut out = vec![0.0; s.rows()];
        self.block_apply_add(i, v, 1.0, &mut out);
        Ok(out)
    }

    fn adjoint_apply_block(&self, i: usize, y: &[f64]) -> Result<Vec<f64>> {
        let s = self.structure();
        s.check_block(i)?;
        check_len("adjoint input", s.rows(), y.len())?;
        let mut out = vec![0.0; s.width(i)];
        self.block_adjoint_into(i, y, &mut out);
        Ok(out)
    }

    /// `lambda_i = lambda_max(A_i^T A_i)`: the closed form when known, the
    /// exact squared column norm for width-one blocks, power iteration
    /// otherwise.
    fn block_sq_norm(&self, i: usize) -> Result<f64> {
        let s = self.structure();
        s.check_block(i)?;
        if let Some(l) = self.known_block_sq_norm(i) {
            return Ok(l);
        }
        let mut col = vec![0.0; s.rows()];
        if s.width(i) == 1 {
            self.block_apply_add(i, &[1.0], 1.0, &mut col);
            return Ok(dot(&col, &col));
        }
        let width = s.width(i);
        Ok(power_iteration(
            width,
            s.rows(),
            CounterRng::substream(POWER_SEED, i as u64),
            |v, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                self.block_apply_add(i, v, 1.0, out)
            },
            |y, out| self.block_adjoint_into(i, y, out),
        ))
    }

    fn block_norms(&self) -> Result<BlockNorms> {
        let lambda = (0..self.num_blocks())
            .map(|i| self.block_sq_norm(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockNorms {
            lambda,
            tolerance: POWER_TOL,
        })
    }

    /// Dense copy, built one block at a time from unit vectors.
    fn to_dense(&self) -> DenseOperator {
        let s = self.structure().clone();
        let (m, n) = (s.rows(), s.cols());
        let mut data = vec![0.0; m * n];
        let mut col = vec![0.0; m];
        for i in 0..s.num_blocks() {
            let w = s.width(i);
            let mut e = vec![0.0; w];
            for (k, j) in s.range(i).enumerate() {
                e[k] = 1.0;
                col.iter_mut().for_each(|c| *c = 0.0);
                self.block_apply_add(i, &e, 1.0, &mut col);
                data[j * m..(j + 1) * m].copy_from_slice(&col);
                e[k] = 0.0;
            }
        }
        DenseOperator::new(m, n, data, s).expect("dense copy has consistent shape")
    }
}

/// `||A||^2 = lambda_max(A^T A)` for the whole operator, by power iteration.
pub fn operator_sq_norm(op: &dyn BlockOperator) -> f64 {
    power_iteration(
        op.cols(),
        op.rows(),
        CounterRng::substream(POWER_SEED, u64::MAX),
        |v, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            op.apply_add(v, 1.0, out)
        },
        |y, out| op.adjoint_into(y, out),
    )
}

fn power_iteration(
    n: usize,
    m: usize,
    mut rng: CounterRng,
    mut forward: impl FnMut(&[f64], &mut [f64]),
    mut backward: impl FnMut(&[f64], &mut [f64]),
) -> f64 {
    let mut v = rng.normal_vec(n);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; m];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        forward(&v, &mut w);
        // Rayleigh quotient <v, A^T A v> with ||v|| = 1.
        let next = dot(&w, &w);
        if next == 0.0 {
            return 0.0;
        }
        backward(&w, &mut v);
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let converged = (next - lambda).abs() <= POWER_TOL * next;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_structure_truncates_last_block() {
        let s = BlockStructure::uniform(3, 10, 4).unwrap();
        assert_eq!(s.widths(), vec![4, 4, 2]);
        assert_eq!(s.offsets(), &[0, 4, 8, 10]);
        assert_eq!(s.cols(), 10);
    }

    #[test]
    fn rejects_empty_and_zero_width() {
        assert!(BlockStructure::from_widths(2, &[]).is_err());
        assert!(BlockStructure::from_widths(2, &[1, 0]).is_err());
    }

    #[test]
    fn block_index_out_of_range_is_an_error() {
        let op = IdentityOperator::new(2, 1).unwrap();
        assert!(matches!(
            op.apply_block(2, &[1.0]),
            Err(Error::BlockOutOfRange { index: 2, count: 2 })
        ));
        assert!(matches!(
            op.apply(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
