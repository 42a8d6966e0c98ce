//! Singular value decompositions and singular value thresholding.
//!
//! The exact backend is nalgebra's bidiagonalization SVD. The randomized
//! backend projects onto a Gaussian sketch of the range, refines it with
//! power iterations, and finishes with an exact SVD of the small projected
//! matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{orthonormalize_columns, Matrix};
use crate::rng::CounterRng;

/// Iteration cap handed to the implicit-shift QR sweeps.
pub const SVD_MAX_ITERS: usize = 100_000;

/// Thin SVD `Z = U diag(s) V^T`, singular values in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= sj);
        }
        us.matmul(&self.v.transpose())
    }
}

fn to_nalgebra(z: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(z.rows(), z.cols(), z.as_slice())
}

/// Exact thin SVD.
pub fn exact_svd(z: &Matrix) -> Result<Svd> {
    let k = z.rows().min(z.cols());
    if k == 0 {
        return Ok(Svd {
            u: Matrix::zeros(z.rows(), 0),
            s: Vec::new(),
            v: Matrix::zeros(z.cols(), 0),
        });
    }
    let svd = to_nalgebra(z)
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::SvdNonConvergence {
            iterations: SVD_MAX_ITERS,
        })?;
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok(Svd {
        u: Matrix::from_fn(z.rows(), k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| svd.singular_values[j]).collect(),
        v: Matrix::from_fn(z.cols(), k, |i, j| vt[(order[j], i)]),
    })
}

/// Singular values only, in decreasing order.
pub fn singular_values(z: &Matrix) -> Result<Vec<f64>> {
    if z.rows().min(z.cols()) == 0 {
        return Ok(Vec::new());
    }
    let svd = to_nalgebra(z)
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::SvdNonConvergence {
            iterations: SVD_MAX_ITERS,
        })?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Parameters of the randomized range finder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedSvdParams {
    pub target_rank: usize,
    pub oversampling: usize,
    pub power_iters: usize,
    pub seed: u64,
}

pub const DEFAULT_OVERSAMPLING: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

/// Rank-`target_rank` approximate SVD via a Gaussian sketch with power
/// iterations. Deterministic given the seed.
pub fn randomized_svd(z: &Matrix, params: RandomizedSvdParams) -> Result<Svd> {
    let RandomizedSvdParams {
        target_rank,
        oversampling,
        power_iters,
        seed,
    } = params;
    let (m, n) = (z.rows(), z.cols());
    let sketch = target_rank + oversampling;
    if target_rank == 0 {
        return Err(invalid("randomized SVD target rank must be at least 1"));
    }
    if sketch > m.min(n) {
        return Err(invalid(format!(
            "rank budget {target_rank} + {oversampling} exceeds min dimension {}",
            m.min(n)
        )));
    }
    let mut rng = CounterRng::new(seed);
    let omega = Matrix::from_col_major(n, sketch, rng.normal_vec(n * sketch));
    let mut q = z.matmul(&omega);
    orthonormalize_columns(&mut q);
    for _ in 0..power_iters {
        let mut w = z.t_matmul(&q);
        orthonormalize_columns(&mut w);
        q = z.matmul(&w);
        orthonormalize_columns(&mut q);
    }
    // B = Q^T Z is sketch x n; factor its transpose, which is tall.
    let bt = z.t_matmul(&q);
    let small = exact_svd(&bt)?;
    // B^T = Ub S Vb^T  =>  B = Vb S Ub^T  =>  Z ~ (Q Vb) S Ub^T
    let mut u = q.matmul(&small.v);
    let mut v = small.u;
    let mut s = small.s;
    u.truncate_cols(target_rank);
    v.truncate_cols(target_rank);
    s.truncate(target_rank);
    Ok(Svd { u, s, v })
}

/// Which factorization the nuclear-norm prox uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdBackend {
    Exact,
    Randomized {
        oversampling: usize,
        power_iters: usize,
        seed: u64,
    },
}

impl SvdBackend {
    pub fn randomized(seed: u64) -> Self {
        SvdBackend::Randomized {
            oversampling: DEFAULT_OVERSAMPLING,
            power_iters: DEFAULT_POWER_ITERS,
            seed,
        }
    }
}

/// Rank floor and padding for the randomized SVT rank heuristic.
pub const SVT_RANK_FLOOR: usize = 10;
pub const SVT_RANK_PAD: usize = 5;

/// Result of one singular value thresholding call.
#[derive(Debug, Clone, PartialEq)]
pub struct SvtOutput {
    pub matrix: Matrix,
    /// Number of singular values above the threshold.
    pub rank: usize,
}

/// `U max(S - threshold, 0) V^T`, the prox of `threshold * ||.||_*`.
///
/// For the randomized backend `rank_hint` is the surviving rank of the
/// previous call; the sketch targets `max(rank_hint, 10) + 5` components,
/// falling back to the exact backend when that budget does not fit.
pub fn svt(z: &Matrix, threshold: f64, backend: SvdBackend, rank_hint: usize) -> Result<SvtOutput> {
    if !(threshold >= 0.0) {
        return Err(invalid("SVT threshold must be non-negative"));
    }
    let svd = match backend {
        SvdBackend::Exact => exact_svd(z)?,
        SvdBackend::Randomized {
            oversampling,
            power_iters,
            seed,
        } => {
            let target_rank = rank_hint.max(SVT_RANK_FLOOR) + SVT_RANK_PAD;
            if target_rank + oversampling > z.rows().min(z.cols()) {
                exact_svd(z)?
            } else {
                randomized_svd(
                    z,
                    RandomizedSvdParams {
                        target_rank,
                        oversampling,
                        power_iters,
                        seed,
                    },
                )?
            }
        }
    };
    let mut out = Matrix::zeros(z.rows(), z.cols());
    let mut rank = 0;
    for (j, &sj) in svd.s.iter().enumerate() {
        let shrunk = sj - threshold;
        if shrunk <= 0.0 {
            continue;
        }
        rank += 1;
        let uj = svd.u.col(j);
        for c in 0..z.cols() {
            let w = shrunk * svd.v[(c, j)];
            if w != 0.0 {
                crate::linalg::axpy(w, uj, out.col_mut(c));
            }
        }
    }
    Ok(SvtOutput { matrix: out, rank })
}
