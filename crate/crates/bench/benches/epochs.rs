use std::hint::black_box;

use coopd::experiments::{BenchConfig, BenchMethod, Experiment};
use coopd::operators::operator_sq_norm;
use coopd::solvers::{coo_pda_step, pda_step, CooPdState, PdaState};
use coopd::{IndexStream, ProxContext, StepSizes};
use criterion::{criterion_group, criterion_main, Criterion};

// One epoch of each method on the desk-scale basis pursuit instance.
fn bp_epochs(c: &mut Criterion) {
    let cfg = BenchConfig::defaults(Experiment::Bp1, false);
    let mut group = c.benchmark_group("bp1-epoch");
    group.sample_size(20);

    let inst = cfg.instance("", BenchMethod::Pda, 1).unwrap();
    let op = inst.op.as_ref();
    let steps = StepSizes::pda_grid(operator_sq_norm(op), 4, 0.99, inst.num_blocks()).unwrap();
    let mut st = PdaState::new(vec![0.0; inst.cols()], vec![0.0; inst.rows()]);
    let mut ctx = ProxContext::default();
    group.bench_function("pda", |b| {
        b.iter(|| pda_step(&mut st, op, &inst.b, &inst.g, steps.tau[0], steps.sigma, &mut ctx).unwrap())
    });

    for method in [BenchMethod::BlockPda, BenchMethod::CooPda] {
        let inst = cfg.instance("", method, 1).unwrap();
        let op = inst.op.as_ref();
        let p = inst.num_blocks();
        let sigma = StepSizes::coordinate_sigma(cfg.coordinate_exponent(method, ""), p);
        let steps = StepSizes::default_steps(op, sigma, cfg.gamma).unwrap();
        let mut st = CooPdState::new(op, &inst.b, vec![0.0; inst.cols()], sigma).unwrap();
        let mut stream = IndexStream::new(1, p);
        group.bench_function(method.name(), |b| {
            b.iter(|| {
                for _ in 0..p {
                    let i = stream.next().unwrap();
                    coo_pda_step(&mut st, op, &inst.b, &inst.g, &steps, i, &mut ctx).unwrap();
                }
                black_box(&st.x);
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bp_epochs);
criterion_main!(benches);
