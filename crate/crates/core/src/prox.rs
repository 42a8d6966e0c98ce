//! Separable convex functions and their proximal maps.
//!
//! `g(x) = sum_i g_i(x_i)` where each `g_i` is drawn from a fixed catalog
//! with a closed-form (or SVD-based) prox. Keeping the catalog closed means
//! every supported function can be run through the same property suite.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{dist2, Matrix};
use crate::operators::BlockStructure;
use crate::svd::{singular_values, svt, SvdBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockFunction {
    Zero,
    /// `scale * ||x||_1`
    L1 { scale: f64 },
    /// `scale * ||x - center||_1`
    L1Centered { scale: f64, center: Vec<f64> },
    /// `<c, x>` restricted to `x >= 0`
    LinearNonneg { c: Vec<f64> },
    /// Indicator of the closed ball `B(center, radius)`
    BallIndicator { radius: f64, center: Vec<f64> },
    /// `scale * ||X||_*` for a `rows x cols` matrix stored column-major
    Nuclear { scale: f64, rows: usize, cols: usize },
}

/// Relative slack when testing ball membership of a projected point.
const BALL_SLACK: f64 = 1e-12;

/// Mutable state threaded through prox evaluations: the SVD backend for
/// nuclear blocks, its rank heuristic, and a call counter.
#[derive(Debug, Clone)]
pub struct ProxContext {
    pub backend: SvdBackend,
    pub rank_hint: usize,
    pub svd_count: usize,
}

impl Default for ProxContext {
    fn default() -> Self {
        Self::new(SvdBackend::Exact)
    }
}

impl ProxContext {
    pub fn new(backend: SvdBackend) -> Self {
        Self {
            backend,
            rank_hint: 0,
            svd_count: 0,
        }
    }
}

impl BlockFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            BlockFunction::Zero => Ok(()),
            BlockFunction::L1 { scale } | BlockFunction::Nuclear { scale, .. } => {
                if *scale >= 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("scale must be finite and non-negative"))
                }
            }
            BlockFunction::L1Centered { scale, center } => {
                if !(*scale >= 0.0 && scale.is_finite()) {
                    return Err(invalid("scale must be finite and non-negative"));
                }
                finite("l1 center", center)
            }
            BlockFunction::LinearNonneg { c } => finite("linear cost", c),
            BlockFunction::BallIndicator { radius, center } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("ball radius must be positive"));
                }
                finite("ball center", center)
            }
        }
    }

    /// Required block width, when the function pins one down.
    pub fn required_width(&self) -> Option<usize> {
        match self {
            BlockFunction::Zero | BlockFunction::L1 { .. } => None,
            BlockFunction::L1Centered { center, .. } => Some(center.len()),
            BlockFunction::LinearNonneg { c } => Some(c.len()),
            BlockFunction::BallIndicator { center, .. } => Some(center.len()),
            BlockFunction::Nuclear { rows, cols, .. } => Some(rows * cols),
        }
    }

    /// Function value; `+inf` outside the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            BlockFunction::Zero => 0.0,
            BlockFunction::L1 { scale } => scale * x.iter().map(|v| v.abs()).sum::<f64>(),
            BlockFunction::L1Centered { scale, center } => {
                scale * x.iter().zip(center).map(|(v, c)| (v - c).abs()).sum::<f64>()
            }
            BlockFunction::LinearNonneg { c } => {
                if x.iter().any(|&v| v < 0.0) {
                    f64::INFINITY
                } else {
                    x.iter().zip(c).map(|(v, ci)| v * ci).sum()
                }
            }
            BlockFunction::BallIndicator { radius, center } => {
                if dist2(x, center) <= radius * (1.0 + BALL_SLACK) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BlockFunction::Nuclear { scale, rows, cols } => {
                let m = Matrix::from_col_major(*rows, *cols, x.to_vec());
                match singular_values(&m) {
                    Ok(sv) => scale * sv.iter().sum::<f64>(),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    /// `out = argmin_x f(x) + ||x - z||^2 / (2 step)`.
    pub fn prox_into(&self, step: f64, z: &[f64], out: &mut [f64], ctx: &mut ProxContext) -> Result<()> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid(format!("prox step must be positive and finite, got {step}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prox input"));
        }
        check_len("prox output", z.len(), out.len())?;
        if let Some(w) = self.required_width() {
            check_len("prox input", w, z.len())?;
        }
        match self {
            BlockFunction::Zero => out.copy_from_slice(z),
            BlockFunction::L1 { scale } => {
                let t = step * scale;
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = soft_threshold(v, t);
                }
            }
            BlockFunction::L1Centered { scale, center } => {
                let t = step * scale;
                for ((o, &v), c) in out.iter_mut().zip(z).zip(center) {
                    *o = c + soft_threshold(v - c, t);
                }
            }
            BlockFunction::LinearNonneg { c } => {
                for ((o, &v), ci) in out.iter_mut().zip(z).zip(c) {
                    *o = (v - step * ci).max(0.0);
                }
            }
            BlockFunction::BallIndicator { radius, center } => {
                let d = dist2(z, center);
                let shrink = if d > *radius { radius / d } else { 1.0 };
                for ((o, &v), c) in out.iter_mut().zip(z).zip(center) {
                    *o = c + shrink * (v - c);
                }
            }
            BlockFunction::Nuclear { scale, rows, cols } => {
                let m = Matrix::from_col_major(*rows, *cols, z.to_vec());
                let backend = match ctx.backend {
                    SvdBackend::Randomized {
                        oversampling,
                        power_iters,
                        seed,
                    } => SvdBackend::Randomized {
                        oversampling,
                        power_iters,
                        seed: seed.wrapping_add(ctx.svd_count as u64),
                    },
                    exact => exact,
                };
                let res = svt(&m, step * scale, backend, ctx.rank_hint)?;
                ctx.svd_count += 1;
                ctx.rank_hint = res.rank;
                out.copy_from_slice(res.matrix.as_slice());
            }
        }
        Ok(())
    }

    pub fn prox(&self, step: f64, z: &[f64], ctx: &mut ProxContext) -> Result<Vec<f64>> {
        let mut out = vec![0.0; z.len()];
        self.prox_into(step, z, &mut out, ctx)?;
        Ok(out)
    }
}

fn finite(what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `g = sum_i g_i`, one catalog entry per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableFunction {
    blocks: Vec<BlockFunction>,
}

impl SeparableFunction {
    pub fn new(blocks: Vec<BlockFunction>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("separable function needs at least one block"));
        }
        for b in &blocks {
            b.validate()?;
        }
        Ok(Self { blocks })
    }

    /// The same function on each of `p` blocks.
    pub fn repeated(f: BlockFunction, p: usize) -> Result<Self> {
        Self::new(vec![f; p])
    }

    pub fn blocks(&self) -> &[BlockFunction] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &BlockFunction {
        &self.blocks[i]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Checks block count and per-block widths against an operator layout.
    pub fn check_structure(&self, s: &BlockStructure) -> Result<()> {
        check_len("function blocks", s.num_blocks(), self.blocks.len())?;
        for (i, f) in self.blocks.iter().enumerate() {
            if let Some(w) = f.required_width() {
                check_len("function block width", s.width(i), w)?;
            }
        }
        Ok(())
    }

    pub fn value(&self, s: &BlockStructure, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, f)| f.value(&x[s.range(i)]))
            .sum()
    }

    pub fn prox_block_into(
        &self,
        i: usize,
        step: f64,
        z: &[f64],
        out: &mut [f64],
        ctx: &mut ProxContext,
    ) -> Result<()> {
        if i >= self.blocks.len() {
            return Err(Error::BlockOutOfRange {
                index: i,
                count: self.blocks.len(),
            });
        }
        self.blocks[i].prox_into(step, z, out, ctx)
    }
}

/// `max_j dist(v_j, d(scale |.|)(x_j))`: the infinity-norm distance from `v`
/// to the subdifferential of `scale * ||.||_1` at `x`.
pub fn subdiff_dist_inf_l1(x: &[f64], v: &[f64], scale: f64) -> f64 {
    x.iter()
        .zip(v)
        .map(|(&xj, &vj)| {
            if xj > 0.0 {
                (vj - scale).abs()
            } else if xj < 0.0 {
                (vj + scale).abs()
            } else {
                (vj.abs() - scale).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
