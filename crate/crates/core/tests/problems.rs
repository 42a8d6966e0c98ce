mod common;

use coopd::linalg::{norm_inf, sub};
use coopd::metrics::{normal_eq_residual, rate_probe};
use coopd::operators::io;
use coopd::problems::{
    gen_bp_dct, gen_bp_gaussian, gen_lp, lp_vertex_oracle, BpDctParams, BpGaussianParams, LpParams,
};
use coopd::{CounterRng, Truth};

use common::gaussian;

#[test]
fn planted_signals_satisfy_the_constraints() {
    let bp1 = gen_bp_gaussian(&BpGaussianParams::new(50, 200, 3)).unwrap();
    let bp2 = gen_bp_dct(&BpDctParams::new(100, 400, 3)).unwrap();
    for inst in [bp1, bp2] {
        let Some(Truth::Signal { x, .. }) = &inst.truth else { panic!() };
        let r = sub(&inst.op.apply(x).unwrap(), &inst.b);
        assert!(norm_inf(&r) <= 1e-12, "{}", inst.label);
    }
}

#[test]
fn lp_oracle_beats_every_sampled_feasible_point() {
    let inst = gen_lp(&LpParams::new(2, 4, 8)).unwrap();
    let Some(Truth::Optimum { x: Some(xo), value }) = inst.truth.clone() else { panic!() };
    let a = inst.op.to_dense().to_matrix();
    assert!(norm_inf(&sub(&a.matvec(&xo), &inst.b)) <= 1e-10);
    assert!(xo.iter().all(|v| *v >= 0.0));
    // Feasible points: fix two coordinates at random, solve for the other two.
    let mut rng = CounterRng::new(2);
    let mut checked = 0;
    for _ in 0..4000 {
        let t = [rng.uniform_in(0.0, 1.2), rng.uniform_in(0.0, 1.2)];
        let rhs: Vec<f64> = (0..2).map(|r| inst.b[r] - a[(r, 2)] * t[0] - a[(r, 3)] * t[1]).collect();
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let x0 = (rhs[0] * a[(1, 1)] - a[(0, 1)] * rhs[1]) / det;
        let x1 = (a[(0, 0)] * rhs[1] - a[(1, 0)] * rhs[0]) / det;
        if x0 < 0.0 || x1 < 0.0 {
            continue;
        }
        let x = [x0, x1, t[0], t[1]];
        assert!(inst.objective(&x) >= value - 1e-9);
        checked += 1;
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn vertex_oracle_on_a_hand_lp() {
    // min x1 + 2 x2 + 3 x3, x1 + x2 + x3 = 1: optimum e1, value 1.
    let a = coopd::Matrix::from_row_major(1, 3, &[1.0, 1.0, 1.0]);
    let (x, v) = lp_vertex_oracle(&a, &[1.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(x, vec![1.0, 0.0, 0.0]);
    assert_eq!(v, 1.0);
    // infeasible: x >= 0 cannot sum to -1
    assert!(lp_vertex_oracle(&a, &[-1.0], &[1.0, 2.0, 3.0]).is_none());
}

#[test]
fn normal_equation_residual_vanishes_at_least_squares_point() {
    let mut rng = CounterRng::new(41);
    let a = gaussian(&mut rng, 9, 4);
    let b = rng.normal_vec(9);
    let na = nalgebra::DMatrix::from_column_slice(9, 4, a.as_slice());
    let x = na
        .clone()
        .svd(true, true)
        .solve(&nalgebra::DVector::from_column_slice(&b), 1e-14)
        .unwrap();
    let op = coopd::operators::DenseOperator::from_matrix(&a, 2).unwrap();
    assert!(normal_eq_residual(&op, &b, x.as_slice()).unwrap() <= 1e-8);
    let explicit = a.matvec_t(&sub(&a.matvec(&[1.0, 2.0, 3.0, 4.0]), &b));
    let n = explicit.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((normal_eq_residual(&op, &b, &[1.0, 2.0, 3.0, 4.0]).unwrap() - n).abs() <= 1e-12 * n);
}

#[test]
fn rate_probe_examples() {
    let h: Vec<(f64, f64)> = (1..=200).map(|k| (k as f64, 3.0 / (k * k) as f64)).collect();
    let d = rate_probe(&h);
    assert!((d.sup_k2_gap - 3.0).abs() <= 1e-12);
    assert!((d.tail_slope + 2.0).abs() <= 1e-9);
    let zero: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64, 0.0)).collect();
    let d = rate_probe(&zero);
    assert_eq!((d.sup_k2_gap, d.sup_k_gap), (0.0, 0.0));
}

#[test]
fn exported_instance_reads_back() {
    let inst = gen_bp_gaussian(&BpGaussianParams::new(10, 30, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    inst.export(dir.path()).unwrap();
    let b = io::read_vector(&dir.path().join("b.bin")).unwrap();
    assert_eq!(b, inst.b);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("instance.json")).unwrap()).unwrap();
    assert!(sidecar.is_object());
}
