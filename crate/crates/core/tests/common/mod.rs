#![allow(dead_code)]

use coopd::linalg::{dot, Matrix};
use coopd::prox::{BlockFunction, ProxContext};
use coopd::CounterRng;

pub fn gaussian(rng: &mut CounterRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_col_major(rows, cols, rng.normal_vec(rows * cols))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Row-by-row triple loop, no shared code with the operators.
pub fn naive_matvec(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| (0..cols).map(|c| entry(r, c) * x[c]).sum())
        .collect()
}

pub fn naive_matvec_t(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64, y: &[f64]) -> Vec<f64> {
    (0..cols)
        .map(|c| (0..rows).map(|r| entry(r, c) * y[r]).sum())
        .collect()
}

/// Catalog members sized for `width` (nuclear blocks get a 4 x (width/4)
/// shape, so `width` should be a multiple of 4).
pub fn catalog(rng: &mut CounterRng, width: usize) -> Vec<BlockFunction> {
    vec![
        BlockFunction::Zero,
        BlockFunction::L1 {
            scale: rng.uniform_in(0.1, 3.0),
        },
        BlockFunction::L1Centered {
            scale: rng.uniform_in(0.1, 3.0),
            center: rng.normal_vec(width),
        },
        BlockFunction::LinearNonneg { c: rng.normal_vec(width) },
        BlockFunction::BallIndicator {
            radius: rng.uniform_in(0.5, 2.0),
            center: rng.normal_vec(width),
        },
        BlockFunction::Nuclear {
            scale: rng.uniform_in(0.1, 3.0),
            rows: 4,
            cols: width / 4,
        },
    ]
}

/// A random point in the domain of `f`.
pub fn domain_point(f: &BlockFunction, rng: &mut CounterRng, width: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rng.normal_vec(width).iter().map(|x| 3.0 * x).collect();
    match f {
        BlockFunction::LinearNonneg { .. } => v.iter_mut().for_each(|x| *x = x.abs()),
        BlockFunction::BallIndicator { radius, center } => {
            let d = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = radius * rng.uniform().sqrt();
            for (x, c) in v.iter_mut().zip(center) {
                *x = c + r * *x / d;
            }
        }
        _ => {}
    }
    v
}

/// Largest violation of
/// `f(xbar) - f(x) + <z - xbar, x - xbar> / step <= 0`
/// over the comparison points, where `xbar = prox_{step f}(z)`.
pub fn prox_inequality_violation(f: &BlockFunction, step: f64, z: &[f64], points: &[Vec<f64>]) -> f64 {
    let mut ctx = ProxContext::default();
    let xbar = f.prox(step, z, &mut ctx).unwrap();
    let fbar = f.value(&xbar);
    assert!(fbar.is_finite(), "prox left the domain of {f:?}");
    let zx: Vec<f64> = z.iter().zip(&xbar).map(|(a, b)| a - b).collect();
    points
        .iter()
        .map(|x| {
            let d: Vec<f64> = x.iter().zip(&xbar).map(|(a, b)| a - b).collect();
            fbar - f.value(x) + dot(&zx, &d) / step
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `exp(uniform(ln lo, ln hi))`
pub fn log_uniform(rng: &mut CounterRng, lo: f64, hi: f64) -> f64 {
    rng.uniform_in(lo.ln(), hi.ln()).exp()
}
