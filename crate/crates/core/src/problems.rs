//! Seeded instance generators.
//!
//! Each generator is a pure function of its parameters and seed; all random
//! draws go through one [`CounterRng`] in a fixed order, so instances are
//! bit-identical across runs and independent of the block width requested.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{check_len, invalid, Result};
use crate::linalg::{dist2, norm2, solve_square, Matrix};
use crate::operators::{
    dct_entry, hcat, io, BlockOperator, DenseOperator, IdentityOperator, LowRankOperator, SampledDctOperator,
    SparseColumnOperator,
};
use crate::prox::{BlockFunction, SeparableFunction};
use crate::rng::CounterRng;

/// Known reference data attached to an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    /// Planted signal; `noise = b - A x` when the data were perturbed.
    Signal { x: Vec<f64>, noise: Option<Vec<f64>> },
    /// Planted coefficients `x` of a signal `w = Phi x` in the DCT dictionary.
    Dictionary {
        x: Vec<f64>,
        w: Vec<f64>,
        noise: Option<Vec<f64>>,
    },
    /// Planted `(L, S)` split of `M = L + S`.
    LowRankSparse { low_rank: Matrix, sparse: Matrix },
    /// Optimal value (and a minimizer, when known).
    Optimum { x: Option<Vec<f64>>, value: f64 },
    /// Minimizers of `sum_i |t - a_i|` form the interval `[lo, hi]`.
    Consensus { lo: f64, hi: f64, data: Vec<f64> },
}

impl Truth {
    pub fn noise(&self) -> Option<&[f64]> {
        match self {
            Truth::Signal { noise, .. } | Truth::Dictionary { noise, .. } => noise.as_deref(),
            _ => None,
        }
    }
}

/// Operator, right-hand side, objective and optional ground truth of one
/// `min g(x) s.t. Ax = b` problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub op: Arc<dyn BlockOperator>,
    pub b: Vec<f64>,
    pub g: SeparableFunction,
    pub truth: Option<Truth>,
    pub label: String,
    pub params: serde_json::Value,
}

impl ProblemInstance {
    pub fn new(
        op: Arc<dyn BlockOperator>,
        b: Vec<f64>,
        g: SeparableFunction,
        truth: Option<Truth>,
        label: impl Into<String>,
        params: serde_json::Value,
    ) -> Result<Self> {
        check_len("right-hand side", op.rows(), b.len())?;
        g.check_structure(op.structure())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(invalid("right-hand side must be finite"));
        }
        Ok(Self {
            op,
            b,
            g,
            truth,
            label: label.into(),
            params,
        })
    }

    pub fn rows(&self) -> usize {
        self.op.rows()
    }

    pub fn cols(&self) -> usize {
        self.op.cols()
    }

    pub fn num_blocks(&self) -> usize {
        self.op.num_blocks()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.g.value(self.op.structure(), x)
    }

    /// Relative distance of an iterate to the planted signal:
    /// `||x - x_true|| / ||x_true||`, `||Phi x - w|| / ||w||` for dictionary
    /// instances, `||L - L_true||_F / ||L_true||_F` for low-rank-plus-sparse.
    pub fn signal_error(&self, x: &[f64]) -> Option<f64> {
        match self.truth.as_ref()? {
            Truth::Signal { x: xt, .. } => Some(dist2(x, xt) / norm2(xt)),
            Truth::Dictionary { w, .. } => {
                let what = dct_synthesis(x);
                Some(dist2(&what, w) / norm2(w))
            }
            Truth::LowRankSparse { low_rank, .. } => {
                let l = &x[..low_rank.as_slice().len()];
                Some(dist2(l, low_rank.as_slice()) / low_rank.frobenius())
            }
            Truth::Optimum { x: Some(xt), .. } => Some(dist2(x, xt) / norm2(xt).max(f64::MIN_POSITIVE)),
            Truth::Optimum { x: None, .. } => None,
            Truth::Consensus { lo, hi, .. } => {
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                Some((lo - mean).max(mean - hi).max(0.0))
            }
        }
    }

    /// Writes the operator dump, `b`, truth vectors and a JSON sidecar into
    /// `dir`. Sparse operators use the triplet layout, everything else is
    /// materialized densely.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let op_file = if let Some(sp) = self.as_sparse() {
            io::write_sparse(&dir.join("operator"), sp)?;
            "operator.{indptr,indices,values}"
        } else {
            io::write_dense(&dir.join("operator.bin"), &self.op.to_dense())?;
            "operator.bin"
        };
        io::write_vector(&dir.join("b.bin"), &self.b)?;
        let mut truth_files = serde_json::Map::new();
        if let Some(t) = &self.truth {
            let mut put = |name: &str, v: &[f64]| -> Result<()> {
                let file = format!("truth_{name}.bin");
                io::write_vector(&dir.join(&file), v)?;
                truth_files.insert(name.to_string(), json!(file));
                Ok(())
            };
            match t {
                Truth::Signal { x, noise } => {
                    put("x", x)?;
                    if let Some(e) = noise {
                        put("noise", e)?;
                    }
                }
                Truth::Dictionary { x, w, noise } => {
                    put("x", x)?;
                    put("w", w)?;
                    if let Some(e) = noise {
                        put("noise", e)?;
                    }
                }
                Truth::LowRankSparse { low_rank, sparse } => {
                    put("low_rank", low_rank.as_slice())?;
                    put("sparse", sparse.as_slice())?;
                }
                Truth::Optimum { x, value } => {
                    if let Some(x) = x {
                        put("x", x)?;
                    }
                    truth_files.insert("value".into(), json!(value));
                }
                Truth::Consensus { lo, hi, data } => {
                    put("data", data)?;
                    truth_files.insert("lo".into(), json!(lo));
                    truth_files.insert("hi".into(), json!(hi));
                }
            }
        }
        let sidecar = json!({
            "label": self.label,
            "params": self.params,
            "operator": { "kind": self.op.kind(), "file": op_file, "rows": self.rows(), "cols": self.cols() },
            "block_widths": self.op.structure().widths(),
            "b": "b.bin",
            "g": self.g,
            "truth": truth_files,
        });
        fs::write(dir.join("instance.json"), serde_json::to_vec_pretty(&sidecar)?)?;
        Ok(())
    }

    fn as_sparse(&self) -> Option<&SparseColumnOperator> {
        self.op.as_sparse()
    }
}


/// `w = Phi x` with `Phi` the orthonormal DCT-II matrix.
pub fn dct_synthesis(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| dct_entry(n, k, j) * v)
                .sum()
        })
        .collect()
}

fn normal_dense(rng: &mut CounterRng, rows: usize, cols: usize) -> Vec<f64> {
    rng.normal_vec(rows * cols)
}

fn l1_objective(op: &dyn BlockOperator, scale: f64) -> Result<SeparableFunction> {
    SeparableFunction::repeated(BlockFunction::L1 { scale }, op.num_blocks())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpGaussianParams {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub amplitude: (f64, f64),
    pub seed: u64,
    pub width: usize,
}

impl BpGaussianParams {
    /// Gaussian basis-pursuit family: 5% support, amplitudes in (-10, 10).
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            density: 0.05,
            amplitude: (-10.0, 10.0),
            seed,
            width: 1,
        }
    }
}

/// Gaussian `A`, sparse planted `x`, `b = A x`, `g = ||.||_1`.
pub fn gen_bp_gaussian(p: &BpGaussianParams) -> Result<ProblemInstance> {
    if !(p.density > 0.0 && p.density < 1.0) {
        return Err(invalid("density must lie in (0, 1)"));
    }
    if p.m == 0 || p.m >= p.n {
        return Err(invalid("basis pursuit needs 0 < m < n"));
    }
    let mut rng = CounterRng::new(p.seed);
    let a = normal_dense(&mut rng, p.m, p.n);
    let k = (p.density * p.n as f64).ceil() as usize;
    let support = rng.sample_distinct(p.n, k);
    let mut x = vec![0.0; p.n];
    for j in support {
        x[j] = rng.uniform_in(p.amplitude.0, p.amplitude.1);
    }
    let op = DenseOperator::from_row_major(p.m, p.n, a, p.width)?;
    let b = op.apply(&x)?;
    let g = l1_objective(&op, 1.0)?;
    ProblemInstance::new(
        Arc::new(op),
        b,
        g,
        Some(Truth::Signal { x, noise: None }),
        format!("bp-gaussian(m={},n={},density={},seed={})", p.m, p.n, p.density, p.seed),
        serde_json::to_value(p)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpDctParams {
    pub m: usize,
    pub n: usize,
    pub k_nonzero: usize,
    pub head: usize,
    pub seed: u64,
    pub width: usize,
}

impl BpDctParams {
    /// Sampled-DCT family: 50 normal entries among the first 100 coordinates.
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            k_nonzero: 50.min(n),
            head: 100.min(n),
            seed,
            width: 1,
        }
    }
}

/// `A = R Phi` (randomly sampled rows of the orthonormal DCT), planted `x`
/// supported in the first `head` coordinates.
pub fn gen_bp_dct(p: &BpDctParams) -> Result<ProblemInstance> {
    if p.k_nonzero > p.head || p.head > p.n || p.m > p.n || p.m == 0 {
        return Err(invalid("need k_nonzero <= head <= n and 0 < m <= n"));
    }
    let mut rng = CounterRng::new(p.seed);
    let mut rows = rng.sample_distinct(p.n, p.m);
    rows.sort_unstable();
    let support = rng.sample_distinct(p.head, p.k_nonzero);
    let mut x = vec![0.0; p.n];
    for j in support {
        x[j] = rng.normal();
    }
    let op = SampledDctOperator::new(rows, p.n, p.width)?;
    let b = op.apply(&x)?;
    let g = l1_objective(&op, 1.0)?;
    ProblemInstance::new(
        Arc::new(op),
        b,
        g,
        Some(Truth::Signal { x, noise: None }),
        format!("bp-dct(m={},n={},k={},head={},seed={})", p.m, p.n, p.k_nonzero, p.head, p.seed),
        serde_json::to_value(p)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Gaussian,
    /// `A = A_L A_R` with inner dimension `m / 2`.
    LowRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Gaussian { std: f64 },
    /// Round every entry of `A x` to the nearest integer, halves away from zero.
    Rounding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dictionary {
    /// `x` itself is the sparse signal.
    Identity,
    /// The signal is `w = Phi x`; the operator becomes `M Phi`.
    Dct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpNoisyParams {
    pub m: usize,
    pub n: usize,
    pub k_nonzero: usize,
    pub matrix: MatrixKind,
    pub noise: Noise,
    pub dictionary: Dictionary,
    pub seed: u64,
    pub width: usize,
}

impl BpNoisyParams {
    /// 50-sparse signal, unit Gaussian noise, block width 50.
    pub fn new(m: usize, n: usize, matrix: MatrixKind, noise: Noise, seed: u64) -> Self {
        Self {
            m,
            n,
            k_nonzero: 50.min(n),
            matrix,
            noise,
            dictionary: Dictionary::Identity,
            seed,
            width: 50,
        }
    }
}

/// Basis pursuit with perturbed data. Sparse amplitudes are uniform in
/// (-10, 10) for the identity dictionary and standard normal for the DCT
/// dictionary.
pub fn gen_bp_noisy(p: &BpNoisyParams) -> Result<ProblemInstance> {
    if p.m == 0 || p.k_nonzero > p.n {
        return Err(invalid("need m > 0 and k_nonzero <= n"));
    }
    if p.matrix == MatrixKind::LowRank && p.m % 2 != 0 {
        return Err(invalid("low-rank operator needs even m (inner dimension m/2)"));
    }
    if let Noise::Gaussian { std } = p.noise {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(invalid("noise std must be finite and non-negative"));
        }
    }
    let mut rng = CounterRng::new(p.seed);
    let (m, n) = (p.m, p.n);
    // Measurement matrix, kept factored for the low-rank case.
    let (left, right) = match p.matrix {
        MatrixKind::Gaussian => (None, Matrix::from_row_major(m, n, &normal_dense(&mut rng, m, n))),
        MatrixKind::LowRank => {
            let h = m / 2;
            let l = Matrix::from_row_major(m, h, &normal_dense(&mut rng, m, h));
            let r = Matrix::from_row_major(h, n, &normal_dense(&mut rng, h, n));
            (Some(l), r)
        }
    };
    let support = rng.sample_distinct(n, p.k_nonzero);
    let mut x = vec![0.0; n];
    for j in support {
        x[j] = match p.dictionary {
            Dictionary::Identity => rng.uniform_in(-10.0, 10.0),
            Dictionary::Dct => rng.normal(),
        };
    }
    // Fold the dictionary into the rightmost factor: R <- R Phi.
    let right = match p.dictionary {
        Dictionary::Identity => right,
        Dictionary::Dct => {
            let phi = Matrix::from_fn(n, n, |k, j| dct_entry(n, k, j));
            right.matmul(&phi)
        }
    };
    let op: Arc<dyn BlockOperator> = match left {
        None => Arc::new(DenseOperator::from_matrix(&right, p.width)?),
        Some(l) => Arc::new(LowRankOperator::new(l, right, p.width)?),
    };
    let clean = op.apply(&x)?;
    let b: Vec<f64> = match p.noise {
        Noise::None => clean.clone(),
        Noise::Gaussian { std } => clean.iter().map(|v| v + std * rng.normal()).collect(),
        Noise::Rounding => clean.iter().map(|v| v.round()).collect(),
    };
    let noise: Vec<f64> = b.iter().zip(&clean).map(|(bi, ci)| bi - ci).collect();
    let truth = match p.dictionary {
        Dictionary::Identity => Truth::Signal {
            x,
            noise: Some(noise),
        },
        Dictionary::Dct => Truth::Dictionary {
            w: dct_synthesis(&x),
            x,
            noise: Some(noise),
        },
    };
    let g = l1_objective(op.as_ref(), 1.0)?;
    ProblemInstance::new(
        op,
        b,
        g,
        Some(truth),
        format!(
            "bp-noisy(m={},n={},k={},matrix={:?},noise={:?},dictionary={:?},seed={})",
            m, n, p.k_nonzero, p.matrix, p.noise, p.dictionary, p.seed
        ),
        serde_json::to_value(p)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpcaParams {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    pub density: f64,
    pub magnitude: f64,
    /// Weight of the l1 term; `None` means `1 / sqrt(n1)`.
    pub lambda: Option<f64>,
    pub seed: u64,
}

impl RpcaParams {
    pub fn new(n1: usize, n2: usize, rank: usize, seed: u64) -> Self {
        Self {
            n1,
            n2,
            rank,
            density: 0.05,
            magnitude: 500.0,
            lambda: None,
            seed,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(1.0 / (self.n1 as f64).sqrt())
    }
}

/// `min ||L||_* + lambda ||S||_1 s.t. L + S = M` as a two-block problem
/// over `x = (vec L, vec S)` (column-major) with `A = [I | I]`.
pub fn gen_rpca(p: &RpcaParams) -> Result<ProblemInstance> {
    if p.rank == 0 || p.rank > p.n1.min(p.n2) {
        return Err(invalid("rank must satisfy 1 <= r <= min(n1, n2)"));
    }
    if !(0.0..1.0).contains(&p.density) || !(p.magnitude >= 0.0) {
        return Err(invalid("density must lie in [0, 1) and magnitude be non-negative"));
    }
    let (n1, n2) = (p.n1, p.n2);
    let mut rng = CounterRng::new(p.seed);
    let q1 = Matrix::from_row_major(n1, p.rank, &normal_dense(&mut rng, n1, p.rank));
    let q2 = Matrix::from_row_major(p.rank, n2, &normal_dense(&mut rng, p.rank, n2));
    let low_rank = q1.matmul(&q2);
    let mn = n1 * n2;
    let count = (p.density * mn as f64).round() as usize;
    let mut sparse = Matrix::zeros(n1, n2);
    let positions = rng.sample_distinct(mn, count);
    for pos in positions {
        let v = rng.uniform_in(-p.magnitude, p.magnitude);
        sparse[(pos % n1, pos / n1)] = v;
    }
    let b: Vec<f64> = low_rank
        .as_slice()
        .iter()
        .zip(sparse.as_slice())
        .map(|(l, s)| l + s)
        .collect();
    let id: Arc<dyn BlockOperator> = Arc::new(IdentityOperator::new(mn, mn)?);
    let op = hcat(id, 1.0, mn)?;
    let g = SeparableFunction::new(vec![
        BlockFunction::Nuclear {
            scale: 1.0,
            rows: n1,
            cols: n2,
        },
        BlockFunction::L1 { scale: p.lambda() },
    ])?;
    ProblemInstance::new(
        Arc::new(op),
        b,
        g,
        Some(Truth::LowRankSparse { low_rank, sparse }),
        format!(
            "rpca(n1={n1},n2={n2},r={},density={},magnitude={},order=col-major,seed={})",
            p.rank, p.density, p.magnitude, p.seed
        ),
        serde_json::to_value(p)?,
    )
}

/// Vertex enumeration is exponential; instances beyond this size ship
/// without a reference optimum.
pub const LP_ORACLE_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpParams {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Use `c = 0` (every feasible point optimal).
    pub zero_cost: bool,
    pub width: usize,
}

impl LpParams {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            seed,
            zero_cost: false,
            width: 1,
        }
    }
}

/// Standard-form LP `min <c, x> s.t. Ax = b, x >= 0`.
///
/// `b = A x0` for a random `x0 > 0`, so the LP is feasible, and
/// `c = A^T y0 + s0` with `s0 > 0`, so the dual is feasible and the LP is
/// bounded without any regeneration loop.
pub fn gen_lp(p: &LpParams) -> Result<ProblemInstance> {
    if p.m == 0 || p.m >= p.n {
        return Err(invalid("LP needs 0 < m < n"));
    }
    let mut rng = CounterRng::new(p.seed);
    let a = normal_dense(&mut rng, p.m, p.n);
    let x0: Vec<f64> = (0..p.n).map(|_| rng.uniform_in(0.1, 1.0)).collect();
    let y0 = rng.normal_vec(p.m);
    let s0: Vec<f64> = (0..p.n).map(|_| rng.uniform_in(0.1, 1.0)).collect();
    let op = DenseOperator::from_row_major(p.m, p.n, a, p.width)?;
    let b = op.apply(&x0)?;
    let c: Vec<f64> = if p.zero_cost {
        vec![0.0; p.n]
    } else {
        op.adjoint_apply(&y0)?
            .iter()
            .zip(&s0)
            .map(|(a, s)| a + s)
            .collect()
    };
    let truth = if p.n <= LP_ORACLE_MAX_N {
        lp_vertex_oracle(&op.to_matrix(), &b, &c).map(|(x, value)| Truth::Optimum { x: Some(x), value })
    } else {
        None
    };
    let s = op.structure().clone();
    let blocks = (0..s.num_blocks())
        .map(|i| BlockFunction::LinearNonneg {
            c: c[s.range(i)].to_vec(),
        })
        .collect();
    let g = SeparableFunction::new(blocks)?;
    ProblemInstance::new(
        Arc::new(op),
        b,
        g,
        truth,
        format!("lp(m={},n={},zero_cost={},seed={})", p.m, p.n, p.zero_cost, p.seed),
        serde_json::to_value(p)?,
    )
}

/// Minimizes `<c, x>` over the vertices of `{x >= 0 : Ax = b}` by solving
/// every `m x m` basis. Returns the best vertex and its value.
pub fn lp_vertex_oracle(a: &Matrix, b: &[f64], c: &[f64]) -> Option<(Vec<f64>, f64)> {
    let (m, n) = (a.rows(), a.cols());
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut basis: Vec<usize> = (0..m).collect();
    loop {
        let sub = Matrix::from_fn(m, m, |i, j| a[(i, basis[j])]);
        if let Some(xb) = solve_square(&sub, b) {
            let scale = 1.0 + xb.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
            if xb.iter().all(|&v| v >= -1e-10 * scale) {
                let mut x = vec![0.0; n];
                for (k, &j) in basis.iter().enumerate() {
                    x[j] = xb[k].max(0.0);
                }
                let value: f64 = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
                if best.as_ref().map_or(true, |(_, v)| value < *v) {
                    best = Some((x, value));
                }
            }
        }
        // Next m-combination of 0..n in lexicographic order.
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] < n - m + i {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        basis[i] += 1;
        for k in i + 1..m {
            basis[k] = basis[k - 1] + 1;
        }
    }
}

/// Undirected edge list helpers for consensus instances.
pub mod graphs {
    pub fn ring(p: usize) -> Vec<(usize, usize)> {
        match p {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..p).map(|i| (i, (i + 1) % p)).collect(),
        }
    }

    pub fn path(p: usize) -> Vec<(usize, usize)> {
        (1..p).map(|i| (i - 1, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    pub p: usize,
    pub edges: Vec<(usize, usize)>,
    /// Node data `a_i`; drawn uniformly from (-10, 10) when absent.
    pub data: Option<Vec<f64>>,
    pub seed: u64,
}

/// Product-space formulation of `min_t sum_i |t - a_i|`: one scalar block
/// per node, `A` the signed edge-incidence matrix, `b = 0`.
pub fn gen_consensus(p: &ConsensusParams) -> Result<ProblemInstance> {
    if p.p == 0 {
        return Err(invalid("consensus needs at least one node"));
    }
    for &(u, v) in &p.edges {
        if u >= p.p || v >= p.p || u == v {
            return Err(invalid(format!("bad edge ({u}, {v}) for {} nodes", p.p)));
        }
    }
    if !connected(p.p, &p.edges) {
        return Err(invalid("consensus graph is disconnected"));
    }
    let data = match &p.data {
        Some(d) => {
            check_len("node data", p.p, d.len())?;
            d.clone()
        }
        None => {
            let mut rng = CounterRng::new(p.seed);
            (0..p.p).map(|_| rng.uniform_in(-10.0, 10.0)).collect()
        }
    };
    let triplets: Vec<(usize, usize, f64)> = p
        .edges
        .iter()
        .enumerate()
        .flat_map(|(e, &(u, v))| [(e, u, 1.0), (e, v, -1.0)])
        .collect();
    let rows = p.edges.len().max(1);
    let op = SparseColumnOperator::from_triplets(rows, p.p, &triplets, 1)?;
    let g = SeparableFunction::new(
        data.iter()
            .map(|&a| BlockFunction::L1Centered {
                scale: 1.0,
                center: vec![a],
            })
            .collect(),
    )?;
    let mut sorted = data.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = if p.p % 2 == 1 {
        (sorted[p.p / 2], sorted[p.p / 2])
    } else {
        (sorted[p.p / 2 - 1], sorted[p.p / 2])
    };
    ProblemInstance::new(
        Arc::new(op),
        vec![0.0; rows],
        g,
        Some(Truth::Consensus { lo, hi, data }),
        format!("consensus(p={},edges={},seed={})", p.p, p.edges.len(), p.seed),
        serde_json::to_value(p)?,
    )
}

fn connected(p: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); p];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; p];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !std::mem::replace(&mut seen[v], true) {
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `min r(v) + f(w) s.t. K v - w = b` over `x = (v, w)`, i.e. the operator
/// `[K | -I]`. `r` is aligned with the blocks of `K`, `f` with the identity
/// tail split into blocks of `tail_width`. `b = None` means `b = 0`.
pub fn gen_composite(
    k: Arc<dyn BlockOperator>,
    r: SeparableFunction,
    f: SeparableFunction,
    tail_width: usize,
    b: Option<Vec<f64>>,
) -> Result<ProblemInstance> {
    let m = k.rows();
    let kind = k.kind();
    let op = hcat(k, -1.0, tail_width)?;
    let blocks: Vec<BlockFunction> = r.blocks().iter().chain(f.blocks()).cloned().collect();
    let g = SeparableFunction::new(blocks)?;
    let b = b.unwrap_or_else(|| vec![0.0; m]);
    ProblemInstance::new(
        Arc::new(op),
        b,
        g,
        None,
        format!("composite(K={kind},m={m},tail_width={tail_width})"),
        json!({ "m": m, "tail_width": tail_width }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_inf;

    #[test]
    fn bp_gaussian_is_consistent_and_deterministic() {
        let p = BpGaussianParams::new(50, 200, 4);
        let a = gen_bp_gaussian(&p).unwrap();
        let Some(Truth::Signal { x, .. }) = &a.truth else { panic!() };
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 10);
        let r = a.op.apply(x).unwrap();
        assert_eq!(norm_inf(&crate::linalg::sub(&r, &a.b)), 0.0);
        let b = gen_bp_gaussian(&p).unwrap();
        assert_eq!(a.b, b.b);
        assert_eq!(a.op.to_dense(), b.op.to_dense());
    }

    #[test]
    fn bp_gaussian_rejects_full_density() {
        let mut p = BpGaussianParams::new(50, 200, 4);
        p.density = 1.0;
        assert!(gen_bp_gaussian(&p).is_err());
        let p = BpGaussianParams::new(200, 200, 4);
        assert!(gen_bp_gaussian(&p).is_err());
    }

    #[test]
    fn width_does_not_change_the_instance() {
        let mut p = BpGaussianParams::new(20, 60, 9);
        let a = gen_bp_gaussian(&p).unwrap();
        p.width = 7;
        let b = gen_bp_gaussian(&p).unwrap();
        assert_eq!(a.b, b.b);
        assert_eq!(b.num_blocks(), 9);
    }

    #[test]
    fn full_dct_sampling_recovers_by_adjoint() {
        let mut p = BpDctParams::new(64, 64, 2);
        p.k_nonzero = 5;
        p.head = 10;
        let inst = gen_bp_dct(&p).unwrap();
        let Some(Truth::Signal { x, .. }) = &inst.truth else { panic!() };
        let back = inst.op.adjoint_apply(&inst.b).unwrap();
        assert!(crate::linalg::dist_inf(&back, x) < 1e-12);
    }

    #[test]
    fn rounding_noise_on_integer_data_is_zero() {
        // A 1x1 "matrix" times an integer signal only stays integral when the
        // entries are integral, so check the rounding map directly.
        for v in [2.5_f64, -2.5, 1.49, 3.0] {
            let r = v.round();
            assert!((r - v).abs() <= 0.5);
        }
        assert_eq!(2.5_f64.round(), 3.0);
        assert_eq!((-2.5_f64).round(), -3.0);
    }

    #[test]
    fn low_rank_requires_even_m() {
        let p = BpNoisyParams::new(21, 80, MatrixKind::LowRank, Noise::Rounding, 1);
        assert!(gen_bp_noisy(&p).is_err());
    }

    #[test]
    fn rpca_reconstructs_m() {
        let inst = gen_rpca(&RpcaParams::new(60, 40, 3, 5)).unwrap();
        let Some(Truth::LowRankSparse { low_rank, sparse }) = &inst.truth else { panic!() };
        let m: Vec<f64> = low_rank.as_slice().iter().zip(sparse.as_slice()).map(|(a, b)| a + b).collect();
        assert!(crate::linalg::dist_inf(&m, &inst.b) <= 1e-12);
        assert_eq!(inst.num_blocks(), 2);
        assert_eq!(inst.op.block_norms().unwrap().lambda, vec![1.0, 1.0]);
    }

    #[test]
    fn rpca_rejects_zero_rank() {
        assert!(gen_rpca(&RpcaParams::new(10, 10, 0, 1)).is_err());
    }

    #[test]
    fn rpca_without_sparse_part() {
        let mut p = RpcaParams::new(8, 6, 6, 1);
        p.density = 0.0;
        let inst = gen_rpca(&p).unwrap();
        let Some(Truth::LowRankSparse { sparse, .. }) = &inst.truth else { panic!() };
        assert!(sparse.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn consensus_incidence_annihilates_constants() {
        let p = ConsensusParams {
            p: 6,
            edges: graphs::ring(6),
            data: None,
            seed: 3,
        };
        let inst = gen_consensus(&p).unwrap();
        assert!(inst.op.apply(&[1.0; 6]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn consensus_median_interval() {
        let p = ConsensusParams {
            p: 3,
            edges: graphs::path(3),
            data: Some(vec![1.0, 2.0, 9.0]),
            seed: 0,
        };
        let inst = gen_consensus(&p).unwrap();
        assert_eq!(
            inst.truth,
            Some(Truth::Consensus {
                lo: 2.0,
                hi: 2.0,
                data: vec![1.0, 2.0, 9.0]
            })
        );
    }

    #[test]
    fn consensus_rejects_disconnected_graph() {
        let p = ConsensusParams {
            p: 4,
            edges: vec![(0, 1), (2, 3)],
            data: None,
            seed: 0,
        };
        assert!(gen_consensus(&p).is_err());
    }

    #[test]
    fn vertex_oracle_small_lp() {
        // min x0 + 2 x1 + 3 x2  s.t. x0 + x1 + x2 = 1, x >= 0  -> x = e0.
        let a = Matrix::from_row_major(1, 3, &[1.0, 1.0, 1.0]);
        let (x, v) = lp_vertex_oracle(&a, &[1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn composite_tail_norms_are_one() {
        let k = DenseOperator::from_row_major(2, 2, vec![3.0, 0.0, 0.0, 4.0], 1).unwrap();
        let r = SeparableFunction::repeated(BlockFunction::L1 { scale: 1.0 }, 2).unwrap();
        let f = SeparableFunction::repeated(BlockFunction::L1 { scale: 1.0 }, 2).unwrap();
        let inst = gen_composite(Arc::new(k), r, f, 1, None).unwrap();
        assert_eq!(inst.op.block_norms().unwrap().lambda, vec![9.0, 16.0, 1.0, 1.0]);
    }
}
