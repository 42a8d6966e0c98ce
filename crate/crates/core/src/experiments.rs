//! Benchmark drivers shared by the command-line harness and the benches.
//!
//! A [`BenchConfig`] names an instance family, a method line-up and the
//! stepsize exponents; [`run_bench`] builds the instances, runs every
//! (method, seed) pair and returns the reports together with a
//! deterministic [`Summary`]. Nothing here touches the filesystem.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metrics::{RunReport, StoppingRule, Termination};
use crate::operators::{operator_sq_norm, BlockOperator, BlockStructure, DenseOperator};
use crate::problems::{
    gen_bp_dct, gen_bp_gaussian, gen_bp_noisy, gen_composite, gen_consensus, gen_lp, gen_rpca, graphs,
    BpDctParams, BpGaussianParams, BpNoisyParams, ConsensusParams, Dictionary, LpParams, MatrixKind,
    Noise, ProblemInstance, RpcaParams, Truth,
};
use crate::prox::{BlockFunction, SeparableFunction};
use crate::rng::CounterRng;
use crate::solvers::{run, Method, RunConfig, StepSizes};
use crate::svd::SvdBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Bp1,
    Bp2,
    BpNoisy,
    Rpca,
    Lp,
    Consensus,
    Composite,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Bp1,
        Experiment::Bp2,
        Experiment::BpNoisy,
        Experiment::Rpca,
        Experiment::Lp,
        Experiment::Consensus,
        Experiment::Composite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bp1 => "bp1",
            Experiment::Bp2 => "bp2",
            Experiment::BpNoisy => "bp-noisy",
            Experiment::Rpca => "rpca",
            Experiment::Lp => "lp",
            Experiment::Consensus => "consensus",
            Experiment::Composite => "composite",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    Pda,
    BlockPda,
    CooPda,
    PdaR,
    CooPdaR,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 5] = [
        BenchMethod::Pda,
        BenchMethod::BlockPda,
        BenchMethod::CooPda,
        BenchMethod::PdaR,
        BenchMethod::CooPdaR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Pda => "pda",
            BenchMethod::BlockPda => "block-pda",
            BenchMethod::CooPda => "coo-pda",
            BenchMethod::PdaR => "pda-r",
            BenchMethod::CooPdaR => "coo-pda-r",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method '{s}'")))
    }

    pub fn is_full(self) -> bool {
        matches!(self, BenchMethod::Pda | BenchMethod::PdaR)
    }

    pub fn randomized_svd(self) -> bool {
        matches!(self, BenchMethod::PdaR | BenchMethod::CooPdaR)
    }
}

/// Inclusive range of stepsize exponents `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaGrid {
    pub lo: i32,
    pub hi: i32,
}

impl SigmaGrid {
    pub fn single(j: i32) -> Self {
        Self { lo: j, hi: j }
    }

    /// `"j"` or `"a:b"`.
    pub fn parse(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| invalid(format!("bad sigma exponent '{t}'")))
        };
        let g = match s.split_once(':') {
            Some((a, b)) => Self { lo: num(a)?, hi: num(b)? },
            None => Self::single(num(s)?),
        };
        if g.lo > g.hi {
            return Err(invalid(format!("empty sigma grid {s}")));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    /// Grid points ordered by distance from 0, positive first on ties.
    pub fn search_order(&self) -> Vec<i32> {
        let mut js: Vec<i32> = (self.lo..=self.hi).collect();
        js.sort_by_key(|&j| (j.abs(), j < 0));
        js
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub experiment: Experiment,
    pub m: usize,
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    /// Block width for block-pda.
    pub width: usize,
    /// Exponents tried by the full iteration.
    pub sigma_grid: SigmaGrid,
    /// Exponent `j` of `sigma = 1/(2^j n_blocks)` for the coordinate
    /// methods; `None` picks the per-family default.
    pub coo_sigma_exp: Option<i32>,
    pub gamma: f64,
    pub eps: f64,
    pub max_epochs: u64,
    pub seeds: Vec<u64>,
    pub methods: Vec<BenchMethod>,
    pub full_scale: bool,
    /// Worker threads; does not affect results.
    #[serde(skip)]
    pub jobs: usize,
}

/// The four noisy scenarios plus the dictionary one.
pub const NOISY_SCENARIOS: [&str; 5] = [
    "gaussian-gaussian",
    "gaussian-rounding",
    "lowrank-gaussian",
    "lowrank-rounding",
    "dct",
];

/// Block width of the noisy runs and of the identity tail in composite
/// instances is fixed by the family; this is the width used otherwise.
pub const DEFAULT_WIDTH: usize = 50;

impl BenchConfig {
    /// Desk-scale defaults, or the published sizes with `full_scale`.
    pub fn defaults(experiment: Experiment, full_scale: bool) -> Self {
        let (m, n) = if full_scale { (1000, 4000) } else { (200, 800) };
        let (n1, n2, rank) = if full_scale { (1000, 500, 20) } else { (200, 100, 5) };
        let mut cfg = Self {
            experiment,
            m,
            n,
            n1,
            n2,
            rank,
            width: DEFAULT_WIDTH,
            sigma_grid: SigmaGrid { lo: -15, hi: 15 },
            coo_sigma_exp: None,
            gamma: crate::solvers::DEFAULT_GAMMA,
            eps: 1e-6,
            max_epochs: 5000,
            seeds: vec![1],
            methods: vec![BenchMethod::Pda, BenchMethod::BlockPda, BenchMethod::CooPda],
            full_scale,
            jobs: 1,
        };
        match experiment {
            Experiment::Bp1 | Experiment::Bp2 => {}
            Experiment::BpNoisy => {
                cfg.methods = vec![BenchMethod::BlockPda];
                cfg.max_epochs = 2000;
            }
            Experiment::Rpca => {
                cfg.sigma_grid = SigmaGrid { lo: -6, hi: 12 };
                cfg.methods = vec![BenchMethod::Pda, BenchMethod::CooPda, BenchMethod::PdaR, BenchMethod::CooPdaR];
                cfg.max_epochs = 2000;
            }
            Experiment::Lp => {
                cfg.m = 4;
                cfg.n = 8;
                cfg.width = 2;
                cfg.sigma_grid = SigmaGrid { lo: -6, hi: 6 };
                cfg.eps = 1e-8;
                cfg.max_epochs = 20_000;
            }
            Experiment::Consensus => {
                cfg.n = 10;
                cfg.m = 10;
                cfg.width = 2;
                cfg.sigma_grid = SigmaGrid { lo: -6, hi: 6 };
                cfg.eps = 1e-8;
                cfg.max_epochs = 20_000;
            }
            Experiment::Composite => {
                cfg.sigma_grid = SigmaGrid { lo: -10, hi: 10 };
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        if self.width == 0 {
            return Err(invalid("block width must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma must lie in (0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max epochs must be positive"));
        }
        if self.sigma_grid.is_empty() {
            return Err(invalid("sigma grid must be nonempty"));
        }
        for m in &self.methods {
            if m.randomized_svd() && self.experiment != Experiment::Rpca {
                return Err(invalid(format!("{} needs the rpca experiment", m.name())));
            }
            if *m == BenchMethod::BlockPda && self.experiment == Experiment::Rpca {
                return Err(invalid("rpca has two fixed blocks; use coo-pda"));
            }
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(invalid("methods must not repeat"));
        }
        match self.experiment {
            Experiment::Rpca => {
                if self.rank == 0 || self.rank > self.n1.min(self.n2) {
                    return Err(invalid("rank must satisfy 1 <= r <= min(n1, n2)"));
                }
            }
            Experiment::Consensus => {
                if self.n < 2 {
                    return Err(invalid("consensus needs at least two nodes (--n)"));
                }
            }
            Experiment::Lp => {
                if self.m == 0 || self.m >= self.n {
                    return Err(invalid("lp needs 0 < m < n"));
                }
            }
            _ => {
                if self.m == 0 || self.n == 0 {
                    return Err(invalid("dimensions must be positive"));
                }
                if self.experiment == Experiment::BpNoisy && self.m % 2 != 0 {
                    return Err(invalid("bp-noisy needs even m for the low-rank scenarios"));
                }
            }
        }
        Ok(())
    }

    /// Scenario names run for this experiment.
    pub fn scenarios(&self) -> Vec<&'static str> {
        match self.experiment {
            Experiment::BpNoisy => NOISY_SCENARIOS.to_vec(),
            _ => vec![""],
        }
    }

    /// Exponent `j` used by a coordinate method in `scenario`.
    pub fn coordinate_exponent(&self, method: BenchMethod, scenario: &str) -> i32 {
        if let Some(j) = self.coo_sigma_exp {
            return j;
        }
        let full = self.full_scale;
        match self.experiment {
            Experiment::Bp1 if full => 11,
            Experiment::Bp2 if full => 8,
            Experiment::Bp2 => -2,
            Experiment::Bp1 => {
                if method == BenchMethod::CooPda {
                    7
                } else {
                    6
                }
            }
            Experiment::BpNoisy => match (scenario, full) {
                ("dct", true) => 22,
                (_, true) => 25,
                ("dct", false) => 12,
                (_, false) => 14,
            },
            // sigma = 2^-6 with the two blocks.
            Experiment::Rpca => 5,
            Experiment::Lp | Experiment::Consensus => 0,
            Experiment::Composite => 7,
        }
    }

    fn width_for(&self, method: BenchMethod) -> usize {
        match method {
            BenchMethod::CooPda | BenchMethod::CooPdaR => 1,
            _ => self.width,
        }
    }

    fn stopping(&self) -> StoppingRule {
        match self.experiment {
            Experiment::Bp1 | Experiment::Bp2 => StoppingRule::BpKkt {
                eps: self.eps,
                scale: 1.0,
            },
            Experiment::BpNoisy => StoppingRule::Never,
            Experiment::Rpca => StoppingRule::RpcaKkt { eps: self.eps },
            Experiment::Lp | Experiment::Consensus | Experiment::Composite => {
                StoppingRule::Settled { eps: self.eps }
            }
        }
    }

    /// The instance a method sees for `(scenario, seed)`; only the block
    /// partition depends on the method.
    pub fn instance(&self, scenario: &str, method: BenchMethod, seed: u64) -> Result<ProblemInstance> {
        let width = self.width_for(method);
        match self.experiment {
            Experiment::Bp1 => {
                let mut p = BpGaussianParams::new(self.m, self.n, seed);
                p.width = width;
                gen_bp_gaussian(&p)
            }
            Experiment::Bp2 => {
                let mut p = BpDctParams::new(self.m, self.n, seed);
                p.width = width;
                gen_bp_dct(&p)
            }
            Experiment::BpNoisy => {
                let (matrix, noise, dictionary) = match scenario {
                    "gaussian-gaussian" => (MatrixKind::Gaussian, Noise::Gaussian { std: 1.0 }, Dictionary::Identity),
                    "gaussian-rounding" => (MatrixKind::Gaussian, Noise::Rounding, Dictionary::Identity),
                    "lowrank-gaussian" => (MatrixKind::LowRank, Noise::Gaussian { std: 1.0 }, Dictionary::Identity),
                    "lowrank-rounding" => (MatrixKind::LowRank, Noise::Rounding, Dictionary::Identity),
                    "dct" => (
                        MatrixKind::Gaussian,
                        Noise::Gaussian { std: 10f64.sqrt() },
                        Dictionary::Dct,
                    ),
                    other => return Err(invalid(format!("unknown noisy scenario '{other}'"))),
                };
                let mut p = BpNoisyParams::new(self.m, self.n, matrix, noise, seed);
                p.dictionary = dictionary;
                p.width = width;
                gen_bp_noisy(&p)
            }
            Experiment::Rpca => gen_rpca(&RpcaParams::new(self.n1, self.n2, self.rank, seed)),
            Experiment::Lp => {
                let mut p = LpParams::new(self.m, self.n, seed);
                p.width = width;
                gen_lp(&p)
            }
            Experiment::Consensus => {
                let cp = ConsensusParams {
                    p: self.n,
                    edges: graphs::ring(self.n),
                    data: None,
                    seed,
                };
                let inst = gen_consensus(&cp)?;
                if width == 1 {
                    Ok(inst)
                } else {
                    reblock(inst, width)
                }
            }
            Experiment::Composite => composite_denoising(self.m, self.n, width, seed),
        }
    }
}

/// Consensus with several nodes per block: same operator and data, the
/// scalar `L1Centered` terms merged per block.
fn reblock(inst: ProblemInstance, width: usize) -> Result<ProblemInstance> {
    let Some(Truth::Consensus { data, .. }) = &inst.truth else {
        return Err(invalid("only consensus instances are reblocked"));
    };
    let structure = BlockStructure::uniform(inst.rows(), inst.cols(), width)?;
    let op = inst.op.to_dense().reblocked(structure.clone())?;
    let blocks = (0..structure.num_blocks())
        .map(|i| BlockFunction::L1Centered {
            scale: 1.0,
            center: data[structure.range(i)].to_vec(),
        })
        .collect();
    ProblemInstance::new(
        Arc::new(op),
        inst.b.clone(),
        SeparableFunction::new(blocks)?,
        inst.truth.clone(),
        format!("{},width={width}", inst.label),
        inst.params.clone(),
    )
}

/// `min ||v||_1 s.t. ||K v - b|| <= delta` written as `[K | -I](v, w) = b`
/// with `w` in the ball: `K` Gaussian `m x n`, a 5%-sparse planted `v`,
/// `b = K v + e` and `delta = ||e||`.
pub fn composite_denoising(m: usize, n: usize, width: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = CounterRng::new(seed);
    let k_data = rng.normal_vec(m * n);
    let k = DenseOperator::from_row_major(m, n, k_data, width)?;
    let nnz = ((n as f64) * 0.05).round().max(1.0) as usize;
    let mut v = vec![0.0; n];
    for j in rng.sample_distinct(n, nnz) {
        v[j] = rng.uniform_in(-10.0, 10.0);
    }
    let e = rng.normal_vec(m);
    let clean = k.apply(&v)?;
    let b: Vec<f64> = clean.iter().zip(&e).map(|(c, ei)| c + ei).collect();
    let delta = crate::linalg::norm2(&e);
    let r = SeparableFunction::repeated(BlockFunction::L1 { scale: 1.0 }, k.num_blocks())?;
    let f = SeparableFunction::new(vec![BlockFunction::BallIndicator {
        radius: delta,
        center: vec![0.0; m],
    }])?;
    let mut inst = gen_composite(Arc::new(k), r, f, m, Some(b))?;
    let mut planted = v;
    planted.extend(e.iter().map(|x| -x));
    inst.truth = Some(Truth::Signal {
        x: planted,
        noise: Some(e),
    });
    inst.label = format!("composite-denoising(m={m},n={n},width={width},seed={seed})");
    inst.params = serde_json::json!({ "m": m, "n": n, "width": width, "seed": seed });
    Ok(inst)
}

/// Outcome of one grid point of the full iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub j: i32,
    pub epochs: u64,
    pub converged: bool,
    /// Budget this point was allowed (the best count so far).
    pub cap: u64,
}

/// Epoch minimizing the signal error over the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub epoch: u64,
    pub signal_err: f64,
}

/// Last-epoch metrics, without the wall clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub feas_inf: f64,
    pub normal_eq: f64,
    pub obj_x: f64,
    pub obj_s: Option<f64>,
    pub signal_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub sigma_exp: i32,
    pub epochs: u64,
    pub iterations: u64,
    pub terminated: String,
    pub svd_count: usize,
    pub final_metrics: FinalMetrics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub early_stop: Option<EarlyStop>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub epochs: Stats,
    pub iterations: Stats,
    pub converged_runs: usize,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: BenchConfig,
    /// Keyed by `method` or `scenario/method`.
    pub methods: BTreeMap<String, MethodSummary>,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One finished run with its full report.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub key: String,
    pub method: BenchMethod,
    pub scenario: String,
    pub sigma_exp: i32,
    pub report: RunReport,
    pub grid: Vec<GridPoint>,
}

impl BenchRun {
    /// File stem for this run's CSV.
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.key.replace('/', "_"), self.report.seed)
    }

    pub fn summary(&self) -> RunSummary {
        let last = self.report.last().expect("history always has epoch 0");
        let early_stop = if self.scenario.is_empty() {
            None
        } else {
            self.report
                .history
                .iter()
                .filter_map(|r| r.signal_err.map(|e| (r.epoch, e)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(epoch, signal_err)| EarlyStop { epoch, signal_err })
        };
        RunSummary {
            seed: self.report.seed,
            sigma_exp: self.sigma_exp,
            epochs: self.report.epochs,
            iterations: self.report.iterations,
            terminated: termination_label(&self.report.termination),
            svd_count: self.report.svd_count,
            final_metrics: FinalMetrics {
                feas_inf: last.feas_inf,
                normal_eq: last.normal_eq,
                obj_x: last.obj_x,
                obj_s: last.obj_s,
                signal_err: last.signal_err,
            },
            early_stop,
            grid: self.grid.clone(),
        }
    }
}

pub fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Converged { .. } => "converged".into(),
        Termination::MaxEpochs => "max-epochs".into(),
        Termination::Diverged { iteration } => format!("diverged@{iteration}"),
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub summary: Summary,
    pub runs: Vec<BenchRun>,
}

fn run_key(scenario: &str, method: BenchMethod) -> String {
    if scenario.is_empty() {
        method.name().to_string()
    } else {
        format!("{scenario}/{}", method.name())
    }
}

fn svd_backend(method: BenchMethod, seed: u64) -> SvdBackend {
    if method.randomized_svd() {
        SvdBackend::randomized(seed)
    } else {
        SvdBackend::Exact
    }
}

/// Coordinate method at its configured exponent.
pub fn run_coordinate(cfg: &BenchConfig, scenario: &str, method: BenchMethod, seed: u64) -> Result<BenchRun> {
    let inst = cfg.instance(scenario, method, seed)?;
    let j = cfg.coordinate_exponent(method, scenario);
    let sigma = StepSizes::coordinate_sigma(j, inst.num_blocks());
    let steps = StepSizes::default_steps(inst.op.as_ref(), sigma, cfg.gamma)?;
    let mut rc = RunConfig::new(Method::CooPda, steps, cfg.stopping(), seed, cfg.max_epochs);
    rc.svd = svd_backend(method, seed);
    let out = run(&inst, &rc)?;
    Ok(BenchRun {
        key: run_key(scenario, method),
        method,
        scenario: scenario.to_string(),
        sigma_exp: j,
        report: out.report,
        grid: Vec::new(),
    })
}

/// Best-of-grid full iteration. Grid points are visited in
/// [`SigmaGrid::search_order`]; each later point only gets the epoch budget
/// of the best so far, so it can at best tie. Selection key: converged
/// first, then fewest epochs, then smaller `j`.
pub fn run_pda_grid(cfg: &BenchConfig, scenario: &str, method: BenchMethod, seed: u64) -> Result<BenchRun> {
    let inst = cfg.instance(scenario, method, seed)?;
    let sq = operator_sq_norm(inst.op.as_ref());
    let p = inst.num_blocks();
    let mut best: Option<(RunReport, i32)> = None;
    let mut grid = Vec::new();
    for j in cfg.sigma_grid.search_order() {
        let cap = match &best {
            Some((r, _)) if r.converged() => r.epochs,
            _ => cfg.max_epochs,
        };
        let steps = StepSizes::pda_grid(sq, j, cfg.gamma, p)?;
        let mut rc = RunConfig::new(Method::Pda, steps, cfg.stopping(), seed, cap);
        rc.svd = svd_backend(method, seed);
        let report = run(&inst, &rc)?.report;
        grid.push(GridPoint {
            j,
            epochs: report.epochs,
            converged: report.converged(),
            cap,
        });
        let better = match &best {
            None => true,
            Some((b, bj)) => pda_key(&report, j) < pda_key(b, *bj),
        };
        if better {
            best = Some((report, j));
        }
    }
    grid.sort_by_key(|g| g.j);
    let (report, j) = best.expect("grid is nonempty");
    Ok(BenchRun {
        key: run_key(scenario, method),
        method,
        scenario: scenario.to_string(),
        sigma_exp: j,
        report,
        grid,
    })
}

/// Unconverged runs rank after converged ones, by final residual.
fn pda_key(r: &RunReport, j: i32) -> (u8, u64, OrdF64, i32) {
    let diverged = matches!(r.termination, Termination::Diverged { .. });
    let resid = r.last().map(|l| l.feas_inf).unwrap_or(f64::INFINITY);
    if r.converged() {
        (0, r.epochs, OrdF64(0.0), j)
    } else if !diverged {
        (1, 0, OrdF64(resid), j)
    } else {
        (2, 0, OrdF64(0.0), j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Runs every (scenario, method, seed) of `cfg` on up to `cfg.jobs`
/// threads. Output order, and therefore the summary, does not depend on
/// the thread count.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for scenario in cfg.scenarios() {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                tasks.push((scenario, method, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let runs: Vec<BenchRun> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(scenario, method, seed)| {
                if method.is_full() {
                    run_pda_grid(cfg, scenario, method, seed)
                } else {
                    run_coordinate(cfg, scenario, method, seed)
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut grouped: BTreeMap<String, Vec<RunSummary>> = BTreeMap::new();
    for r in &runs {
        grouped.entry(r.key.clone()).or_default().push(r.summary());
    }
    let methods = grouped
        .into_iter()
        .map(|(k, runs)| {
            let epochs: Vec<f64> = runs.iter().map(|r| r.epochs as f64).collect();
            let iterations: Vec<f64> = runs.iter().map(|r| r.iterations as f64).collect();
            let summary = MethodSummary {
                epochs: Stats::of(&epochs).expect("at least one seed"),
                iterations: Stats::of(&iterations).expect("at least one seed"),
                converged_runs: runs.iter().filter(|r| r.terminated == "converged").count(),
                runs,
            };
            (k, summary)
        })
        .collect();
    Ok(BenchOutcome {
        summary: Summary {
            config: cfg.clone(),
            methods,
        },
        runs,
    })
}

/// Instances of `cfg` for seed `seed` at the block width of `method`, one
/// per scenario, for reproducibility dumps.
pub fn instances(cfg: &BenchConfig, method: BenchMethod, seed: u64) -> Result<Vec<(String, ProblemInstance)>> {
    cfg.validate()?;
    cfg.scenarios()
        .into_iter()
        .map(|s| {
            let name = if s.is_empty() { cfg.experiment.name().to_string() } else { s.to_string() };
            cfg.instance(s, method, seed).map(|i| (name, i))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_order() {
        assert_eq!(SigmaGrid::parse("3").unwrap(), SigmaGrid::single(3));
        assert_eq!(SigmaGrid::parse("-2:2").unwrap().search_order(), vec![0, 1, -1, 2, -2]);
        assert_eq!(SigmaGrid::parse("3:5").unwrap().search_order(), vec![3, 4, 5]);
        assert!(SigmaGrid::parse("2:1").is_err());
        assert!(SigmaGrid::parse("x").is_err());
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.name()).unwrap(), e);
        }
        for m in BenchMethod::ALL {
            assert_eq!(BenchMethod::parse(m.name()).unwrap(), m);
        }
        assert!(Experiment::parse("bp3").is_err());
    }

    #[test]
    fn validation_rejects_bad_lineups() {
        let mut c = BenchConfig::defaults(Experiment::Bp1, false);
        c.methods = vec![BenchMethod::PdaR];
        assert!(c.validate().is_err());
        c.methods = vec![BenchMethod::Pda, BenchMethod::Pda];
        assert!(c.validate().is_err());
        let mut r = BenchConfig::defaults(Experiment::Rpca, false);
        r.rank = 0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn tiny_compare_runs_every_method() {
        let mut c = BenchConfig::defaults(Experiment::Bp1, false);
        c.m = 20;
        c.n = 60;
        c.width = 10;
        c.sigma_grid = SigmaGrid { lo: -1, hi: 1 };
        c.max_epochs = 3000;
        c.seeds = vec![1, 2];
        c.jobs = 2;
        let out = run_bench(&c).unwrap();
        assert_eq!(out.runs.len(), 6);
        assert_eq!(out.summary.methods.len(), 3);
        let pda = &out.summary.methods["pda"].runs[0];
        assert_eq!(pda.grid.len(), 3);
    }

    #[test]
    fn consensus_reblocking_keeps_the_optimum() {
        let c = BenchConfig::defaults(Experiment::Consensus, false);
        let a = c.instance("", BenchMethod::CooPda, 3).unwrap();
        let b = c.instance("", BenchMethod::BlockPda, 3).unwrap();
        assert_eq!(a.num_blocks(), 10);
        assert_eq!(b.num_blocks(), 5);
        let x = vec![1.5; 10];
        assert!((a.objective(&x) - b.objective(&x)).abs() < 1e-12);
    }

    #[test]
    fn composite_planted_point_is_feasible() {
        let inst = composite_denoising(10, 30, 1, 4).unwrap();
        let Some(Truth::Signal { x, .. }) = &inst.truth else { panic!() };
        let r = inst.op.apply(x).unwrap();
        let gap = crate::linalg::dist_inf(&r, &inst.b);
        assert!(gap < 1e-12);
        assert!(inst.objective(x).is_finite());
    }
}
