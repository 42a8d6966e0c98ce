use std::hint::black_box;

use coopd::problems::{gen_bp_dct, gen_bp_gaussian, gen_rpca, BpDctParams, BpGaussianParams, RpcaParams};
use coopd::svd::{svt, SvdBackend};
use coopd::{BlockFunction, Matrix, ProxContext};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn block_products(c: &mut Criterion) {
    let mut group = c.benchmark_group("block_products");
    for width in [1usize, 50] {
        let mut p = BpGaussianParams::new(200, 800, 1);
        p.width = width;
        let dense = gen_bp_gaussian(&p).unwrap();
        let mut q = BpDctParams::new(200, 800, 1);
        q.width = width;
        let dct = gen_bp_dct(&q).unwrap();
        for (name, inst) in [("sparse-gaussian", &dense), ("sampled-dct", &dct)] {
            let op = inst.op.as_ref();
            let v = vec![1.0; width];
            let y = vec![0.5; op.rows()];
            let mut out = vec![0.0; op.rows()];
            let mut back = vec![0.0; width];
            group.bench_with_input(BenchmarkId::new(format!("{name}/apply"), width), &width, |b, _| {
                b.iter(|| op.block_apply_add(3, black_box(&v), 1.0, &mut out))
            });
            group.bench_with_input(BenchmarkId::new(format!("{name}/adjoint"), width), &width, |b, _| {
                b.iter(|| op.block_adjoint_into(3, black_box(&y), &mut back))
            });
        }
    }
    group.finish();
}

fn prox_catalog(c: &mut Criterion) {
    let z: Vec<f64> = (0..800).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
    let mut ctx = ProxContext::default();
    let l1 = BlockFunction::L1 { scale: 1.0 };
    c.bench_function("prox/l1-800", |b| b.iter(|| l1.prox(0.3, black_box(&z), &mut ctx).unwrap()));
    let ball = BlockFunction::BallIndicator {
        radius: 1.0,
        center: vec![0.0; 800],
    };
    c.bench_function("prox/ball-800", |b| b.iter(|| ball.prox(0.3, black_box(&z), &mut ctx).unwrap()));
}

fn singular_value_thresholding(c: &mut Criterion) {
    let inst = gen_rpca(&RpcaParams::new(200, 100, 5, 1)).unwrap();
    let m = Matrix::from_col_major(200, 100, inst.b.clone());
    let mut group = c.benchmark_group("svt-200x100");
    group.sample_size(20);
    group.bench_function("exact", |b| b.iter(|| svt(black_box(&m), 5.0, SvdBackend::Exact, 5).unwrap()));
    group.bench_function("randomized", |b| {
        b.iter(|| svt(black_box(&m), 5.0, SvdBackend::randomized(7), 5).unwrap())
    });
    group.finish();
}

criterion_group!(benches, block_products, prox_catalog, singular_value_thresholding);
criterion_main!(benches);
