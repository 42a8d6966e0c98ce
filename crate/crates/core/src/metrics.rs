//! Optimality measures, stopping rules, run reports and their exports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::linalg::{dist2, dist_inf, norm2, norm_inf, sub};
use crate::operators::BlockOperator;
use crate::prox::subdiff_dist_inf_l1;

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `||A^T (A x - b)||_2`.
pub fn normal_eq_residual(op: &dyn BlockOperator, b: &[f64], x: &[f64]) -> Result<f64> {
    let r = sub(&op.apply(x)?, b);
    Ok(norm2(&op.adjoint_apply(&r)?))
}

/// Basis-pursuit KKT test at tolerance `eps`:
/// `||Ax - b||_inf <= eps` and `dist_inf(-A^T y, d(scale ||.||_1)(x)) <= eps`.
pub fn bp_kkt(
    op: &dyn BlockOperator,
    b: &[f64],
    x: &[f64],
    y: &[f64],
    scale: f64,
    eps: f64,
) -> Result<bool> {
    let feas = norm_inf(&sub(&op.apply(x)?, b));
    let aty = op.adjoint_apply(y)?;
    Ok(bp_kkt_parts(feas, x, &aty, scale, eps))
}

/// [`bp_kkt`] with the residual norm and `A^T y` already at hand.
pub fn bp_kkt_parts(feas_inf: f64, x: &[f64], aty: &[f64], scale: f64, eps: f64) -> bool {
    if !(feas_inf <= eps) {
        return false;
    }
    let neg: Vec<f64> = aty.iter().map(|v| -v).collect();
    subdiff_dist_inf_l1(x, &neg, scale) <= eps
}

/// Robust-PCA KKT test on column-major vectorized matrices:
/// `||L_prev - L + S - S_prev||_F / (tau ||M||_F) <= eps` and
/// `||S + L - M||_inf / ||M||_F <= eps`. Requires `M != 0`.
pub fn rpca_kkt(
    l_prev: &[f64],
    l: &[f64],
    s_prev: &[f64],
    s: &[f64],
    m: &[f64],
    tau: f64,
    eps: f64,
) -> Result<bool> {
    let (a, b) = rpca_residuals(l_prev, l, s_prev, s, m, tau)?;
    Ok(a <= eps && b <= eps)
}

/// The two quantities compared against `eps` in [`rpca_kkt`].
pub fn rpca_residuals(
    l_prev: &[f64],
    l: &[f64],
    s_prev: &[f64],
    s: &[f64],
    m: &[f64],
    tau: f64,
) -> Result<(f64, f64)> {
    let n = m.len();
    for (what, v) in [("L_prev", l_prev), ("L", l), ("S_prev", s_prev), ("S", s)] {
        check_len(what, n, v.len())?;
    }
    let m_norm = norm2(m);
    if m_norm == 0.0 {
        return Err(invalid("robust PCA stopping rule needs M != 0"));
    }
    if !(tau > 0.0) {
        return Err(invalid("robust PCA stopping rule needs tau > 0"));
    }
    let mut stat = 0.0;
    let mut feas = 0.0_f64;
    for k in 0..n {
        let d = l_prev[k] - l[k] + s[k] - s_prev[k];
        stat += d * d;
        feas = feas.max((s[k] + l[k] - m[k]).abs());
    }
    Ok((stat.sqrt() / (tau * m_norm), feas / m_norm))
}

/// Weighted suboptimality sequences used to probe convergence rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDiagnostic {
    /// `sup_k k^2 gap_k`
    pub sup_k2_gap: f64,
    /// `sup_k k gap_k`
    pub sup_k_gap: f64,
    /// Least-squares slope of `log gap` against `log k` over the second half
    /// of the positive entries; `NaN` with fewer than two such entries.
    pub tail_slope: f64,
}

/// `history` holds `(k, f(s^k) - f_*)` pairs with `k >= 1`.
pub fn rate_probe(history: &[(f64, f64)]) -> RateDiagnostic {
    let mut sup2 = 0.0_f64;
    let mut sup1 = 0.0_f64;
    for &(k, gap) in history {
        sup2 = sup2.max(k * k * gap);
        sup1 = sup1.max(k * gap);
    }
    let pos: Vec<(f64, f64)> = history
        .iter()
        .filter(|(k, g)| *k > 0.0 && *g > 0.0)
        .map(|&(k, g)| (k.ln(), g.ln()))
        .collect();
    let tail = &pos[pos.len() / 2..];
    let tail_slope = if tail.len() < 2 {
        f64::NAN
    } else {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            f64::NAN
        } else {
            sxy / sxx
        }
    };
    RateDiagnostic {
        sup_k2_gap: sup2,
        sup_k_gap: sup1,
        tail_slope,
    }
}

/// When a run stops before its epoch budget. Rules are checked once per
/// epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Basis-pursuit KKT at tolerance `eps` for `scale * ||.||_1`.
    BpKkt { eps: f64, scale: f64 },
    /// Robust-PCA KKT against the iterate of the previous epoch.
    RpcaKkt { eps: f64 },
    /// `||A^T(Ax - b)|| <= eps * ||A^T(Ax0 - b)||`.
    NormalEq { eps: f64 },
    /// `||Ax - b||_inf <= eps` and `||x - x_prev||_inf <= eps (1 + ||x||_inf)`
    /// across one epoch.
    Settled { eps: f64 },
    /// Only the epoch budget applies.
    Never,
    /// Every listed rule holds.
    All { rules: Vec<StoppingRule> },
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StoppingRule::BpKkt { eps, scale } if !(*eps > 0.0 && *scale > 0.0) => {
                Err(invalid("KKT tolerance and scale must be positive"))
            }
            StoppingRule::RpcaKkt { eps } | StoppingRule::NormalEq { eps } | StoppingRule::Settled { eps } if !(*eps > 0.0) => {
                Err(invalid("stopping tolerance must be positive"))
            }
            StoppingRule::All { rules } => rules.iter().try_for_each(|r| r.validate()),
            _ => Ok(()),
        }
    }

    pub(crate) fn needs_dual(&self) -> bool {
        match self {
            StoppingRule::BpKkt { .. } => true,
            StoppingRule::All { rules } => rules.iter().any(|r| r.needs_dual()),
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            StoppingRule::BpKkt { eps, .. } => format!("bp-kkt({eps:e})"),
            StoppingRule::RpcaKkt { eps } => format!("rpca-kkt({eps:e})"),
            StoppingRule::NormalEq { eps } => format!("normal-eq({eps:e})"),
            StoppingRule::Settled { eps } => format!("settled({eps:e})"),
            StoppingRule::Never => "never".into(),
            StoppingRule::All { rules } => rules.iter().map(|r| r.describe()).collect::<Vec<_>>().join("&"),
        }
    }
}

/// Everything a stopping rule may look at after an epoch.
pub(crate) struct StopInputs<'a> {
    pub x: &'a [f64],
    pub prev_x: Option<&'a [f64]>,
    pub b: &'a [f64],
    pub feas_inf: f64,
    pub normal_eq: f64,
    pub initial_normal_eq: f64,
    pub aty: Option<&'a [f64]>,
    /// Primal step used for the robust-PCA statistic.
    pub tau: f64,
}

impl StoppingRule {
    pub(crate) fn satisfied(&self, v: &StopInputs<'_>) -> Result<bool> {
        Ok(match self {
            StoppingRule::Never => false,
            StoppingRule::NormalEq { eps } => v.normal_eq <= eps * v.initial_normal_eq,
            StoppingRule::Settled { eps } => match v.prev_x {
                None => false,
                Some(prev) => {
                    v.feas_inf <= *eps && dist_inf(v.x, prev) <= eps * (1.0 + norm_inf(v.x))
                }
            },
            StoppingRule::BpKkt { eps, scale } => match v.aty {
                Some(aty) => bp_kkt_parts(v.feas_inf, v.x, aty, *scale, *eps),
                None => false,
            },
            StoppingRule::RpcaKkt { eps } => match v.prev_x {
                None => false,
                Some(prev) => {
                    let n = v.b.len();
                    if v.x.len() != 2 * n {
                        return Err(invalid("robust PCA rule needs x = (vec L, vec S)"));
                    }
                    rpca_kkt(&prev[..n], &v.x[..n], &prev[n..], &v.x[n..], v.b, v.tau, *eps)?
                }
            },
            StoppingRule::All { rules } => {
                for r in rules {
                    if !r.satisfied(v)? {
                        return Ok(false);
                    }
                }
                !rules.is_empty()
            }
        })
    }
}

/// Per-epoch measurements. For the averaged method `feas_inf`,
/// `normal_eq` and `signal_err` refer to the averaged iterate `s` and
/// `feas_inf_x` to `x`; for the other methods they refer to `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub feas_inf: f64,
    pub normal_eq: f64,
    pub obj_x: f64,
    pub obj_s: Option<f64>,
    pub signal_err: Option<f64>,
    pub feas_inf_x: Option<f64>,
    pub seconds: f64,
}

/// Consistency check `||u - sigma (Ax - b)||_inf <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub epoch: u64,
    pub deviation: f64,
    pub bound: f64,
}

impl AuditRecord {
    pub fn passed(&self) -> bool {
        self.deviation <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Converged { rule: String },
    MaxEpochs,
    Diverged { iteration: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub sigma: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub gamma: f64,
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub method: String,
    pub instance: String,
    pub seed: u64,
    pub blocks: usize,
    pub epochs: u64,
    pub iterations: u64,
    pub steps: StepSummary,
    pub termination: Termination,
    pub history: Vec<EpochRecord>,
    pub audits: Vec<AuditRecord>,
    pub svd_count: usize,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Converged { .. })
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.history.last()
    }

    /// First epoch whose record satisfies `pred`.
    pub fn first_epoch_where(&self, pred: impl Fn(&EpochRecord) -> bool) -> Option<u64> {
        self.history.iter().find(|r| pred(r)).map(|r| r.epoch)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(s)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(invalid(format!(
                "report schema {} is not supported (expected {REPORT_SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// History as CSV with the columns
    /// `epoch,feas_inf,normal_eq,obj_x,obj_s,signal_err,seconds`;
    /// absent values are empty cells.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.history {
            out.write_record([
                r.epoch.to_string(),
                r.feas_inf.to_string(),
                r.normal_eq.to_string(),
                r.obj_x.to_string(),
                opt(r.obj_s),
                opt(r.signal_err),
                r.seconds.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const CSV_COLUMNS: [&str; 7] = [
    "epoch",
    "feas_inf",
    "normal_eq",
    "obj_x",
    "obj_s",
    "signal_err",
    "seconds",
];

/// Relative distance helper shared by reports and experiments.
pub fn relative_error(x: &[f64], truth: &[f64]) -> f64 {
    dist2(x, truth) / norm2(truth)
}
