//! Full primal-dual iteration, its randomized block-coordinate variant, and
//! the equivalent averaged (Tseng) form, plus the driver that runs them in
//! epochs and records metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{all_finite, axpy, norm2, norm_inf};
use crate::metrics::{
    AuditRecord, EpochRecord, RunReport, StepSummary, StopInputs, StoppingRule, Termination,
    REPORT_SCHEMA_VERSION,
};
use crate::operators::BlockOperator;
use crate::problems::ProblemInstance;
use crate::prox::{ProxContext, SeparableFunction};
use crate::rng::CounterRng;
use crate::svd::SvdBackend;

/// Primal step used for blocks whose columns are all zero.
pub const TAU_CAP: f64 = 1e12;
pub const DEFAULT_GAMMA: f64 = 0.99;
/// Epochs between recomputations of `sigma (Ax - b)` against the running `u`.
pub const AUDIT_EVERY: u64 = 50;

/// Dual step `sigma` and per-block primal steps `tau` with
/// `tau_i sigma lambda_i <= gamma < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub sigma: f64,
    pub tau: Vec<f64>,
    pub gamma: f64,
}

fn check_sigma_gamma(sigma: f64, gamma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma must be positive and finite"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma must lie in (0, 1)"));
    }
    Ok(())
}

impl StepSizes {
    /// `tau_i = gamma / (sigma lambda_i)`, or [`TAU_CAP`] when `lambda_i = 0`.
    pub fn default_steps(op: &dyn BlockOperator, sigma: f64, gamma: f64) -> Result<Self> {
        check_sigma_gamma(sigma, gamma)?;
        Self::from_norms(&op.block_norms()?.lambda, sigma, gamma)
    }

    pub fn from_norms(lambda: &[f64], sigma: f64, gamma: f64) -> Result<Self> {
        check_sigma_gamma(sigma, gamma)?;
        let tau = lambda
            .iter()
            .map(|&l| if l > 0.0 { gamma / (sigma * l) } else { TAU_CAP })
            .collect();
        Ok(Self { sigma, tau, gamma })
    }

    /// Hand-picked steps; accepted iff `max_i tau_i sigma lambda_i < 1`,
    /// which becomes the recorded `gamma`.
    pub fn manual(lambda: &[f64], sigma: f64, tau: Vec<f64>) -> Result<Self> {
        check_len("stepsize vector", lambda.len(), tau.len())?;
        if !(sigma > 0.0) || tau.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("stepsizes must be positive"));
        }
        let worst = tau
            .iter()
            .zip(lambda)
            .map(|(t, l)| t * sigma * l)
            .fold(0.0, f64::max);
        if !(worst < 1.0) {
            return Err(invalid(format!("tau_i sigma lambda_i reaches {worst}, must stay below 1")));
        }
        Ok(Self {
            sigma,
            tau,
            gamma: worst.max(f64::MIN_POSITIVE),
        })
    }

    /// Steps for the full iteration: one scalar `tau` (replicated over the
    /// `p` blocks) with `tau sigma ||A||^2 < 1`.
    pub fn pda(op_sq_norm: f64, sigma: f64, tau: f64, p: usize) -> Result<Self> {
        Self::manual(&[op_sq_norm], sigma, vec![tau]).map(|s| Self {
            tau: vec![tau; p],
            ..s
        })
    }

    /// Grid point `j`: `sigma = 1/(2^j ||A||)`, `tau = gamma 2^j / ||A||`.
    pub fn pda_grid(op_sq_norm: f64, j: i32, gamma: f64, p: usize) -> Result<Self> {
        check_sigma_gamma(1.0, gamma)?;
        if !(op_sq_norm > 0.0) {
            return Err(invalid("operator norm must be positive"));
        }
        let norm = op_sq_norm.sqrt();
        let scale = 2f64.powi(j);
        Self::pda(op_sq_norm, 1.0 / (scale * norm), gamma * scale / norm, p)
    }

    /// `sigma = 1 / (2^j n_blocks)`, the dual step used for coordinate runs.
    pub fn coordinate_sigma(j: i32, n_blocks: usize) -> f64 {
        1.0 / (2f64.powi(j) * n_blocks as f64)
    }

    pub fn summary(&self) -> StepSummary {
        StepSummary {
            sigma: self.sigma,
            tau_min: self.tau.iter().copied().fold(f64::INFINITY, f64::min),
            tau_max: self.tau.iter().copied().fold(0.0, f64::max),
            gamma: self.gamma,
        }
    }

    fn check_blocks(&self, p: usize) -> Result<()> {
        check_len("stepsize vector", p, self.tau.len())?;
        check_sigma_gamma(self.sigma, self.gamma)?;
        if self.tau.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("stepsizes must be positive"));
        }
        Ok(())
    }
}

/// Uniform block indices in `0..p` from a seeded counter generator.
#[derive(Debug, Clone)]
pub struct IndexStream {
    rng: CounterRng,
    p: usize,
}

impl IndexStream {
    pub fn new(seed: u64, p: usize) -> Self {
        assert!(p > 0, "index stream needs at least one block");
        Self {
            rng: CounterRng::new(seed),
            p,
        }
    }

    pub fn blocks(&self) -> usize {
        self.p
    }
}

impl Iterator for IndexStream {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.rng.below(self.p))
    }
}

fn diverged(k: u64) -> Error {
    Error::Diverged { iteration: k }
}

fn residual_into(op: &dyn BlockOperator, x: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().zip(b).for_each(|(o, bi)| *o = -bi);
    op.apply_add(x, 1.0, out);
}

/// Iterates of the full method.
#[derive(Debug, Clone, PartialEq)]
pub struct PdaState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub k: u64,
}

impl PdaState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y, k: 0 }
    }
}

/// `x+ = prox_{tau g}(x - tau A^T y)`, `y+ = y + sigma (A(2x+ - x) - b)`.
pub fn pda_step(
    state: &mut PdaState,
    op: &dyn BlockOperator,
    b: &[f64],
    g: &SeparableFunction,
    tau: f64,
    sigma: f64,
    ctx: &mut ProxContext,
) -> Result<()> {
    let s = op.structure();
    check_len("x", s.cols(), state.x.len())?;
    check_len("y", s.rows(), state.y.len())?;
    let mut grad = vec![0.0; s.cols()];
    op.adjoint_into(&state.y, &mut grad);
    let mut z: Vec<f64> = state.x.iter().zip(&grad).map(|(x, g)| x - tau * g).collect();
    let mut x_new = vec![0.0; s.cols()];
    for i in 0..s.num_blocks() {
        let r = s.range(i);
        g.prox_block_into(i, tau, &z[r.clone()], &mut x_new[r], ctx)?;
    }
    // Reuse z for the extrapolated point 2x+ - x.
    for ((zj, xn), xo) in z.iter_mut().zip(&x_new).zip(&state.x) {
        *zj = 2.0 * xn - xo;
    }
    let mut ax = vec![0.0; s.rows()];
    residual_into(op, &z, b, &mut ax);
    axpy(sigma, &ax, &mut state.y);
    state.x = x_new;
    if !all_finite(&state.x) || !all_finite(&state.y) {
        return Err(diverged(state.k));
    }
    state.k += 1;
    Ok(())
}

/// Iterates of the coordinate method; `u = sigma (Ax - b)` is carried along.
#[derive(Debug, Clone, PartialEq)]
pub struct CooPdState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub k: u64,
}

impl CooPdState {
    /// `y0 = u0 = sigma (A x0 - b)`.
    pub fn new(op: &dyn BlockOperator, b: &[f64], x0: Vec<f64>, sigma: f64) -> Result<Self> {
        check_len("x0", op.cols(), x0.len())?;
        check_len("b", op.rows(), b.len())?;
        let mut u = vec![0.0; op.rows()];
        residual_into(op, &x0, b, &mut u);
        u.iter_mut().for_each(|v| *v *= sigma);
        Ok(Self {
            x: x0,
            y: u.clone(),
            u,
            k: 0,
        })
    }
}

/// One update of block `i`:
/// `x_i+ = prox_{(tau_i/p) g_i}(x_i - (tau_i/p) A_i^T y)`, `t = x_i+ - x_i`,
/// `y+ = y + u + sigma (p+1) A_i t`, `u+ = u + sigma A_i t`.
pub fn coo_pda_step(
    state: &mut CooPdState,
    op: &dyn BlockOperator,
    b: &[f64],
    g: &SeparableFunction,
    steps: &StepSizes,
    i: usize,
    ctx: &mut ProxContext,
) -> Result<()> {
    let s = op.structure();
    s.check_block(i)?;
    check_len("b", s.rows(), b.len())?;
    let p = s.num_blocks() as f64;
    let range = s.range(i);
    let step = steps.tau[i] / p;
    let sigma = steps.sigma;

    let mut z = vec![0.0; range.len()];
    op.block_adjoint_into(i, &state.y, &mut z);
    for (zj, xj) in z.iter_mut().zip(&state.x[range.clone()]) {
        *zj = xj - step * *zj;
    }
    let mut x_new = vec![0.0; range.len()];
    g.prox_block_into(i, step, &z, &mut x_new, ctx)?;
    // z now holds t = x_i+ - x_i.
    for ((t, xn), xo) in z.iter_mut().zip(&x_new).zip(&state.x[range.clone()]) {
        *t = xn - xo;
    }
    let mut at = vec![0.0; s.rows()];
    op.block_apply_add(i, &z, 1.0, &mut at);
    let mut finite = true;
    for ((yr, ur), ar) in state.y.iter_mut().zip(state.u.iter_mut()).zip(&at) {
        *yr += *ur + sigma * (p + 1.0) * ar;
        *ur += sigma * ar;
        finite &= yr.is_finite() && ur.is_finite();
    }
    state.x[range].copy_from_slice(&x_new);
    if !finite || !all_finite(&x_new) {
        return Err(diverged(state.k));
    }
    state.k += 1;
    Ok(())
}

/// Iterates of the averaged form. `ax = A x` and `as_ = A s` are maintained
/// incrementally.
#[derive(Debug, Clone, PartialEq)]
pub struct TsengState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub k: u64,
    pub theta: f64,
    pub ax: Vec<f64>,
    pub as_: Vec<f64>,
}

impl TsengState {
    /// `s0 = x0`, `theta_0 = 1`.
    pub fn new(op: &dyn BlockOperator, x0: Vec<f64>) -> Result<Self> {
        let ax = op.apply(&x0)?;
        Ok(Self {
            s: x0.clone(),
            x: x0,
            k: 0,
            theta: 1.0,
            as_: ax.clone(),
            ax,
        })
    }

    /// `z = theta x + (1 - theta) s`.
    pub fn z(&self) -> Vec<f64> {
        let th = self.theta;
        self.x
            .iter()
            .zip(&self.s)
            .map(|(x, s)| th * x + (1.0 - th) * s)
            .collect()
    }

    /// Dual iterates of the coordinate method recovered from the primal
    /// state: `y = (sigma/theta)(Az - b)`, `u = sigma (Ax - b)`, both
    /// recomputed from scratch.
    pub fn recovered_duals(&self, op: &dyn BlockOperator, b: &[f64], sigma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("b", op.rows(), b.len())?;
        let mut y = vec![0.0; op.rows()];
        residual_into(op, &self.z(), b, &mut y);
        let c = sigma / self.theta;
        y.iter_mut().for_each(|v| *v *= c);
        let mut u = vec![0.0; op.rows()];
        residual_into(op, &self.x, b, &mut u);
        u.iter_mut().for_each(|v| *v *= sigma);
        Ok((y, u))
    }
}

/// One update of block `i` in averaged form:
/// `z = theta x + (1-theta) s`,
/// `x_i+ = prox_{(tau_i/p) g_i}(x_i - (tau_i sigma / (p theta)) A_i^T(Az - b))`,
/// `s+ = z` except `s_i+ = z_i + p theta (x_i+ - x_i)`, `theta+ = 1/(k+2)`.
pub fn tseng_step(
    state: &mut TsengState,
    op: &dyn BlockOperator,
    b: &[f64],
    g: &SeparableFunction,
    steps: &StepSizes,
    i: usize,
    ctx: &mut ProxContext,
) -> Result<()> {
    let s = op.structure();
    s.check_block(i)?;
    check_len("b", s.rows(), b.len())?;
    let p = s.num_blocks() as f64;
    let th = state.theta;
    let range = s.range(i);

    // Az - b from the maintained products.
    let resid: Vec<f64> = state
        .ax
        .iter()
        .zip(&state.as_)
        .zip(b)
        .map(|((ax, as_), bi)| th * ax + (1.0 - th) * as_ - bi)
        .collect();
    let mut grad = vec![0.0; range.len()];
    op.block_adjoint_into(i, &resid, &mut grad);
    let prox_step = steps.tau[i] / p;
    let grad_step = steps.tau[i] * steps.sigma / (p * th);
    let zi: Vec<f64> = grad
        .iter()
        .zip(&state.x[range.clone()])
        .map(|(gj, xj)| xj - grad_step * gj)
        .collect();
    let mut x_new = vec![0.0; range.len()];
    g.prox_block_into(i, prox_step, &zi, &mut x_new, ctx)?;
    let t: Vec<f64> = x_new
        .iter()
        .zip(&state.x[range.clone()])
        .map(|(xn, xo)| xn - xo)
        .collect();

    for (sj, xj) in state.s.iter_mut().zip(&state.x) {
        *sj = th * xj + (1.0 - th) * *sj;
    }
    axpy(p * th, &t, &mut state.s[range.clone()]);
    state.x[range].copy_from_slice(&x_new);

    let mut at = vec![0.0; s.rows()];
    op.block_apply_add(i, &t, 1.0, &mut at);
    // A s+ = A z + p theta A_i t, and A z = resid + b.
    for (((as_, r), bi), a) in state.as_.iter_mut().zip(&resid).zip(b).zip(&at) {
        *as_ = r + bi + p * th * a;
    }
    axpy(1.0, &at, &mut state.ax);

    if !all_finite(&x_new) || !all_finite(&state.s) {
        return Err(diverged(state.k));
    }
    state.k += 1;
    state.theta = 1.0 / (state.k as f64 + 1.0);
    Ok(())
}

/// Weights `beta_k^j` (`j = 0..=k`) with `s^k = sum_j beta_k^j x^j`.
///
/// Built by the recursion `beta_{k+1}^j = (1 - theta_k) beta_k^j` for
/// `j < k`, `beta_{k+1}^k = (1 - theta_k) beta_k^k - (p - 1) theta_k` and
/// `beta_{k+1}^{k+1} = p theta_k`. Closed form: `beta_k^0 = (1 - p)/k`,
/// `beta_k^j = 1/k` for `0 < j < k`, `beta_k^k = p/k` (`k >= 1`), so the
/// first weight is negative whenever `p > 1`.
pub fn beta_coefficients(k: usize, p: usize) -> Vec<f64> {
    let pf = p as f64;
    let mut beta = vec![1.0];
    for t in 0..k {
        let th = 1.0 / (t as f64 + 1.0);
        for b in beta.iter_mut() {
            *b *= 1.0 - th;
        }
        beta[t] -= (pf - 1.0) * th;
        beta.push(pf * th);
    }
    beta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pda,
    CooPda,
    TsengPda,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pda => "pda",
            Method::CooPda => "coo-pda",
            Method::TsengPda => "tseng-pda",
        }
    }

    pub fn is_coordinate(self) -> bool {
        self != Method::Pda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub steps: StepSizes,
    pub stopping: StoppingRule,
    pub seed: u64,
    pub max_epochs: u64,
    /// Starting point; zero when absent.
    pub x0: Option<Vec<f64>>,
    pub svd: SvdBackend,
    pub audit_every: u64,
}

impl RunConfig {
    pub fn new(method: Method, steps: StepSizes, stopping: StoppingRule, seed: u64, max_epochs: u64) -> Self {
        Self {
            method,
            steps,
            stopping,
            seed,
            max_epochs,
            x0: None,
            svd: SvdBackend::Exact,
            audit_every: AUDIT_EVERY,
        }
    }
}

/// Report plus the final iterates. `s` is set for the averaged method.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Option<Vec<f64>>,
}

enum State {
    Pda(PdaState),
    Coo(CooPdState),
    Tseng(TsengState),
}

/// Runs `cfg.method` on `problem` in epochs (one full iteration, or `p`
/// block updates), recording metrics at every epoch boundary including
/// epoch 0. Stopping rules see the live `(x, y)` pair; for the averaged
/// form that is `x` with the recovered dual, so both coordinate forms stop
/// at the same epoch. Divergence ends the run and is recorded in the
/// report.
pub fn run(problem: &ProblemInstance, cfg: &RunConfig) -> Result<RunOutput> {
    let op = problem.op.as_ref();
    let b = problem.b.as_slice();
    let g = &problem.g;
    let p = op.num_blocks();
    let (m, n) = (op.rows(), op.cols());
    cfg.steps.check_blocks(p)?;
    cfg.stopping.validate()?;
    if cfg.method == Method::Pda && cfg.steps.tau.iter().any(|t| *t != cfg.steps.tau[0]) {
        return Err(invalid("the full iteration uses one scalar tau"));
    }
    let x0 = match &cfg.x0 {
        Some(x) => {
            check_len("x0", n, x.len())?;
            x.clone()
        }
        None => vec![0.0; n],
    };
    let sigma = cfg.steps.sigma;
    let mut ctx = ProxContext::new(cfg.svd);
    let mut stream = IndexStream::new(cfg.seed, p);
    let mut state = match cfg.method {
        Method::Pda => State::Pda(PdaState::new(x0, vec![0.0; m])),
        Method::CooPda => State::Coo(CooPdState::new(op, b, x0, sigma)?),
        Method::TsengPda => State::Tseng(TsengState::new(op, x0)?),
    };
    let per_epoch = if cfg.method.is_coordinate() { p as u64 } else { 1 };
    let tau_eff = if cfg.method.is_coordinate() {
        cfg.steps.tau.iter().copied().fold(f64::INFINITY, f64::min) / p as f64
    } else {
        cfg.steps.tau[0]
    };
    let b_inf = norm_inf(b);
    let audit_bound = 1e-10 * (1.0 + sigma * b_inf);

    let start = Instant::now();
    let mut history = Vec::new();
    let mut audits = Vec::new();
    let mut prev_x: Option<Vec<f64>> = None;
    let mut initial_normal_eq = f64::NAN;
    let mut epochs = 0u64;
    let mut iterations = 0u64;
    let termination;

    let mut resid = vec![0.0; m];
    let mut grad = vec![0.0; n];
    loop {
        // Metrics at the current epoch boundary.
        let (x, y_live): (&[f64], Vec<f64>) = match &state {
            State::Pda(st) => {
                residual_into(op, &st.x, b, &mut resid);
                (&st.x, st.y.clone())
            }
            State::Coo(st) => {
                resid.iter_mut().zip(&st.u).for_each(|(r, u)| *r = u / sigma);
                (&st.x, st.y.clone())
            }
            State::Tseng(st) => {
                residual_into(op, &st.s, b, &mut resid);
                let th = st.theta;
                let y: Vec<f64> = st
                    .ax
                    .iter()
                    .zip(&st.as_)
                    .zip(b)
                    .map(|((ax, as_), bi)| sigma / th * (th * ax + (1.0 - th) * as_ - bi))
                    .collect();
                (&st.x, y)
            }
        };
        op.adjoint_into(&resid, &mut grad);
        let normal_eq = norm2(&grad);
        let feas_inf = norm_inf(&resid);
        if epochs == 0 {
            initial_normal_eq = normal_eq;
        }
        let (obj_s, signal_err, feas_inf_x) = match &state {
            State::Tseng(st) => {
                let fx = st
                    .ax
                    .iter()
                    .zip(b)
                    .fold(0.0_f64, |acc, (a, bi)| acc.max((a - bi).abs()));
                (Some(problem.objective(&st.s)), problem.signal_error(&st.s), Some(fx))
            }
            _ => (None, problem.signal_error(x), None),
        };
        history.push(EpochRecord {
            epoch: epochs,
            feas_inf,
            normal_eq,
            obj_x: problem.objective(x),
            obj_s,
            signal_err,
            feas_inf_x,
            seconds: start.elapsed().as_secs_f64(),
        });

        let at_budget = epochs >= cfg.max_epochs;
        if cfg.method.is_coordinate() && epochs > 0 && (epochs % cfg.audit_every.max(1) == 0 || at_budget) {
            audits.push(audit(&state, op, b, sigma, epochs, audit_bound));
        }

        // Stopping rules look at (x, y) of the coordinate iteration.
        let stop_resid;
        let stop_feas = match &state {
            State::Tseng(st) => {
                stop_resid = st.ax.iter().zip(b).map(|(a, bi)| a - bi).collect::<Vec<_>>();
                norm_inf(&stop_resid)
            }
            _ => feas_inf,
        };
        let stop_normal_eq = match &state {
            State::Tseng(st) => crate::metrics::normal_eq_residual(op, b, &st.x)?,
            _ => normal_eq,
        };
        let aty = if cfg.stopping.needs_dual() {
            let mut v = vec![0.0; n];
            op.adjoint_into(&y_live, &mut v);
            Some(v)
        } else {
            None
        };
        let inputs = StopInputs {
            x,
            prev_x: prev_x.as_deref(),
            b,
            feas_inf: stop_feas,
            normal_eq: stop_normal_eq,
            initial_normal_eq,
            aty: aty.as_deref(),
            tau: tau_eff,
        };
        if cfg.stopping.satisfied(&inputs)? {
            termination = Termination::Converged {
                rule: cfg.stopping.describe(),
            };
            break;
        }
        if at_budget {
            termination = Termination::MaxEpochs;
            break;
        }
        prev_x = Some(x.to_vec());

        // One epoch.
        let mut failure = None;
        for _ in 0..per_epoch {
            let r = match &mut state {
                State::Pda(st) => pda_step(st, op, b, g, cfg.steps.tau[0], sigma, &mut ctx),
                State::Coo(st) => {
                    let i = stream.next().expect("infinite stream");
                    coo_pda_step(st, op, b, g, &cfg.steps, i, &mut ctx)
                }
                State::Tseng(st) => {
                    let i = stream.next().expect("infinite stream");
                    tseng_step(st, op, b, g, &cfg.steps, i, &mut ctx)
                }
            };
            match r {
                Ok(()) => iterations += 1,
                Err(Error::Diverged { iteration }) => {
                    failure = Some(iteration);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(iteration) = failure {
            termination = Termination::Diverged { iteration };
            break;
        }
        epochs += 1;
    }

    if !matches!(termination, Termination::Diverged { .. }) {
        assert_eq!(iterations, epochs * per_epoch, "epoch accounting");
    }
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method: cfg.method.name().to_string(),
        instance: problem.label.clone(),
        seed: cfg.seed,
        blocks: p,
        epochs,
        iterations,
        steps: cfg.steps.summary(),
        termination,
        history,
        audits,
        svd_count: ctx.svd_count,
    };
    Ok(match state {
        State::Pda(st) => RunOutput {
            report,
            x: st.x,
            y: st.y,
            s: None,
        },
        State::Coo(st) => RunOutput {
            report,
            x: st.x,
            y: st.y,
            s: None,
        },
        State::Tseng(st) => {
            let (y, _) = st.recovered_duals(op, b, sigma)?;
            RunOutput {
                report,
                x: st.x,
                y,
                s: Some(st.s),
            }
        }
    })
}

fn audit(state: &State, op: &dyn BlockOperator, b: &[f64], sigma: f64, epoch: u64, bound: f64) -> AuditRecord {
    let (x, running): (&[f64], Vec<f64>) = match state {
        State::Coo(st) => (&st.x, st.u.clone()),
        State::Tseng(st) => (&st.x, st.ax.iter().zip(b).map(|(a, bi)| sigma * (a - bi)).collect()),
        State::Pda(_) => unreachable!("full iteration keeps no running residual"),
    };
    let mut fresh = vec![0.0; op.rows()];
    residual_into(op, x, b, &mut fresh);
    let deviation = running
        .iter()
        .zip(&fresh)
        .fold(0.0_f64, |acc, (u, r)| acc.max((u - sigma * r).abs()));
    AuditRecord {
        epoch,
        deviation,
        bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::DenseOperator;
    use crate::prox::BlockFunction;

    #[test]
    fn default_steps_examples() {
        let s = StepSizes::from_norms(&[1.0], 1.0, 0.99).unwrap();
        assert_eq!(s.tau, vec![0.99]);
        let s = StepSizes::from_norms(&[4.0, 1.0], 0.5, 0.99).unwrap();
        assert!((s.tau[0] - 0.495).abs() < 1e-15 && (s.tau[1] - 1.98).abs() < 1e-15);
        let s = StepSizes::from_norms(&[0.0], 1.0, 0.99).unwrap();
        assert_eq!(s.tau, vec![TAU_CAP]);
        assert!(StepSizes::from_norms(&[1.0], 0.0, 0.99).is_err());
        assert!(StepSizes::from_norms(&[1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn manual_unit_steps_need_sigma_below_one() {
        assert!(StepSizes::manual(&[1.0, 1.0], 0.5, vec![1.0, 1.0]).is_ok());
        assert!(StepSizes::manual(&[1.0, 1.0], 1.0, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn pda_step_with_zero_objective() {
        let a = DenseOperator::from_row_major(1, 1, vec![1.0], 1).unwrap();
        let g = SeparableFunction::repeated(BlockFunction::Zero, 1).unwrap();
        let mut st = PdaState::new(vec![1.0], vec![0.0]);
        pda_step(&mut st, &a, &[0.0], &g, 0.5, 0.5, &mut ProxContext::default()).unwrap();
        assert_eq!(st.x, vec![1.0]);
        assert_eq!(st.y, vec![0.5]);
    }

    #[test]
    fn coo_zero_update_adds_u() {
        // g = indicator-free Zero with x already at the prox fixed point needs
        // A^T y = 0: take y = 0 initially by b = A x0.
        let a = DenseOperator::from_row_major(1, 2, vec![1.0, 1.0], 1).unwrap();
        let g = SeparableFunction::repeated(BlockFunction::Zero, 2).unwrap();
        let steps = StepSizes::from_norms(&[1.0, 1.0], 0.5, 0.9).unwrap();
        let mut st = CooPdState::new(&a, &[2.0], vec![1.0, 1.0], 0.5).unwrap();
        st.y = vec![0.0];
        let (y0, u0) = (st.y.clone(), st.u.clone());
        coo_pda_step(&mut st, &a, &[2.0], &g, &steps, 0, &mut ProxContext::default()).unwrap();
        assert_eq!(st.y, vec![y0[0] + u0[0]]);
        assert_eq!(st.u, u0);
    }

    #[test]
    fn beta_small_cases() {
        assert_eq!(beta_coefficients(0, 3), vec![1.0]);
        let b = beta_coefficients(1, 1);
        assert_eq!(b, vec![0.0, 1.0]);
        let b = beta_coefficients(4, 3);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((b[0] + 0.5).abs() < 1e-15);
        assert!((b[4] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn index_stream_is_reproducible_and_in_range() {
        let a: Vec<usize> = IndexStream::new(7, 5).take(100).collect();
        let b: Vec<usize> = IndexStream::new(7, 5).take(100).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|&i| i < 5));
    }
}
