//! Operators defined by structure rather than stored entries.

use std::sync::Arc;

use super::{BlockOperator, BlockStructure};
use crate::error::{check_len, invalid, Result};
use crate::linalg::{axpy, dot, Matrix};

/// `n x n` identity with an arbitrary column partition.
#[derive(Debug, Clone)]
pub struct IdentityOperator {
    structure: BlockStructure,
}

impl IdentityOperator {
    pub fn new(n: usize, width: usize) -> Result<Self> {
        Ok(Self {
            structure: BlockStructure::uniform(n, n, width)?,
        })
    }
}

impl BlockOperator for IdentityOperator {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn kind(&self) -> &'static str {
        "identity"
    }

    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]) {
        axpy(alpha, v, &mut out[self.structure.range(i)]);
    }

    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&y[self.structure.range(i)]);
    }

    fn known_block_sq_norm(&self, _i: usize) -> Option<f64> {
        Some(1.0)
    }
}

/// `[K | sign * I]`: the blocks of `K` followed by blocks of a signed
/// identity on the row space of `K`.
#[derive(Debug, Clone)]
pub struct HcatOperator {
    left: Arc<dyn BlockOperator>,
    sign: f64,
    left_blocks: usize,
    left_cols: usize,
    structure: BlockStructure,
}

/// Appends a `sign * I` tail (sign must be `+1` or `-1`) split into blocks
/// of `tail_width` columns.
pub fn hcat(left: Arc<dyn BlockOperator>, sign: f64, tail_width: usize) -> Result<HcatOperator> {
    if sign != 1.0 && sign != -1.0 {
        return Err(invalid("identity tail sign must be +1 or -1"));
    }
    let m = left.rows();
    let tail = BlockStructure::uniform(m, m, tail_width)?;
    let structure = left.structure().extended(&tail.widths())?;
    Ok(HcatOperator {
        left_blocks: left.num_blocks(),
        left_cols: left.cols(),
        sign,
        left,
        structure,
    })
}

impl HcatOperator {
    pub fn left(&self) -> &Arc<dyn BlockOperator> {
        &self.left
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Number of blocks belonging to `K`.
    pub fn left_blocks(&self) -> usize {
        self.left_blocks
    }

    fn tail_rows(&self, i: usize) -> std::ops::Range<usize> {
        let r = self.structure.range(i);
        r.start - self.left_cols..r.end - self.left_cols
    }
}

impl BlockOperator for HcatOperator {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn kind(&self) -> &'static str {
        "hcat"
    }

    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]) {
        if i < self.left_blocks {
            self.left.block_apply_add(i, v, alpha, out);
        } else {
            axpy(alpha * self.sign, v, &mut out[self.tail_rows(i)]);
        }
    }

    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        if i < self.left_blocks {
            self.left.block_adjoint_into(i, y, out);
        } else {
            for (o, yv) in out.iter_mut().zip(&y[self.tail_rows(i)]) {
                *o = self.sign * yv;
            }
        }
    }

    fn apply_add(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        let (head, tail) = x.split_at(self.left_cols);
        self.left.apply_add(head, alpha, out);
        axpy(alpha * self.sign, tail, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (head, tail) = out.split_at_mut(self.left_cols);
        self.left.adjoint_into(y, head);
        for (o, yv) in tail.iter_mut().zip(y) {
            *o = self.sign * yv;
        }
    }

    fn known_block_sq_norm(&self, i: usize) -> Option<f64> {
        if i < self.left_blocks {
            self.left.block_sq_norm(i).ok()
        } else {
            Some(1.0)
        }
    }
}

/// Row-sampled orthonormal DCT-II: entry `(r, j)` is
/// `c(k) cos(pi (2j + 1) k / (2n))` with `k = rows[r]`, `c(0) = sqrt(1/n)`
/// and `c(k) = sqrt(2/n)` otherwise. Entries are evaluated on demand from
/// a table of the `4n` distinct cosines.
#[derive(Debug, Clone)]
pub struct SampledDctOperator {
    n: usize,
    rows: Vec<usize>,
    structure: BlockStructure,
    cosines: Vec<f64>,
}

impl SampledDctOperator {
    pub fn new(rows: Vec<usize>, n: usize, width: usize) -> Result<Self> {
        if n == 0 || rows.is_empty() {
            return Err(invalid("sampled transform needs n >= 1 and at least one row"));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n {
                return Err(invalid(format!("sampled row {r} out of range for n = {n}")));
            }
            if std::mem::replace(&mut seen[r], true) {
                return Err(invalid(format!("sampled row {r} repeated")));
            }
        }
        let structure = BlockStructure::uniform(rows.len(), n, width)?;
        let nf = n as f64;
        let cosines = (0..4 * n)
            .map(|t| (std::f64::consts::PI * t as f64 / (2.0 * nf)).cos())
            .collect();
        Ok(Self {
            n,
            rows,
            structure,
            cosines,
        })
    }

    pub fn sampled_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn transform_size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, r: usize, j: usize) -> f64 {
        let k = self.rows[r];
        dct_scale(self.n, k) * self.cosines[((2 * j + 1) * k) % (4 * self.n)]
    }
}

/// Entry `(k, j)` of the orthonormal `n x n` DCT-II matrix.
#[inline]
pub fn dct_entry(n: usize, k: usize, j: usize) -> f64 {
    let nf = n as f64;
    let c = dct_scale(n, k);
    // Reduce the angle index modulo 4n before converting to keep the cosine
    // argument small for large n.
    let idx = ((2 * j + 1) * k) % (4 * n);
    c * (std::f64::consts::PI * idx as f64 / (2.0 * nf)).cos()
}

#[inline]
fn dct_scale(n: usize, k: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

impl BlockOperator for SampledDctOperator {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn kind(&self) -> &'static str {
        "sampled-dct"
    }

    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]) {
        for (k, j) in self.structure.range(i).enumerate() {
            let s = alpha * v[k];
            if s == 0.0 {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += s * self.entry(r, j);
            }
        }
    }

    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        for (k, j) in self.structure.range(i).enumerate() {
            out[k] = y.iter().enumerate().map(|(r, yr)| yr * self.entry(r, j)).sum();
        }
    }
}

/// `A = L R` kept in factored form.
#[derive(Debug, Clone)]
pub struct LowRankOperator {
    left: Matrix,
    right: Matrix,
    structure: BlockStructure,
}

impl LowRankOperator {
    pub fn new(left: Matrix, right: Matrix, width: usize) -> Result<Self> {
        check_len("low-rank inner dimension", left.cols(), right.rows())?;
        let structure = BlockStructure::uniform(left.rows(), right.cols(), width)?;
        Ok(Self {
            left,
            right,
            structure,
        })
    }

    pub fn left(&self) -> &Matrix {
        &self.left
    }

    pub fn right(&self) -> &Matrix {
        &self.right
    }

    pub fn inner_dim(&self) -> usize {
        self.left.cols()
    }
}

impl BlockOperator for LowRankOperator {
    fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    fn kind(&self) -> &'static str {
        "low-rank"
    }

    fn block_apply_add(&self, i: usize, v: &[f64], alpha: f64, out: &mut [f64]) {
        let mut inner = vec![0.0; self.inner_dim()];
        for (k, j) in self.structure.range(i).enumerate() {
            if v[k] != 0.0 {
                axpy(v[k], self.right.col(j), &mut inner);
            }
        }
        for (c, &w) in inner.iter().enumerate() {
            if w != 0.0 {
                axpy(alpha * w, self.left.col(c), out);
            }
        }
    }

    fn block_adjoint_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        let inner = self.left.matvec_t(y);
        for (k, j) in self.structure.range(i).enumerate() {
            out[k] = dot(self.right.col(j), &inner);
        }
    }

    fn apply_add(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        let inner = self.right.matvec(x);
        axpy(alpha, &self.left.matvec(&inner), out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let inner = self.left.matvec_t(y);
        out.copy_from_slice(&self.right.matvec_t(&inner));
    }
}
