use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pmpl_bench::{mode_name, run_op, shared_fixed, shared_input};
use pmpl_core::ml::dataset::synthetic_binary;
use pmpl_core::ml::{training_plan, ModelKind, TrainConfig};
use pmpl_core::offline::dealer_generate;
use pmpl_core::sim::{train_local, Preproc};
use pmpl_core::Params;

fn online_ops(c: &mut Criterion) {
    let params = Params::default_params();
    let mut g = c.benchmark_group("online");
    g.sample_size(20);
    for drop in [false, true] {
        let mode = mode_name(drop);
        for n in [16usize, 64] {
            g.bench_with_input(BenchmarkId::new(format!("matmul_{mode}"), n), &n, |b, &n| {
                b.iter(|| {
                    run_op(
                        &params,
                        drop,
                        |p| Ok((shared_input(p, n, n, 1)?, shared_input(p, n, n, 2)?)),
                        |p, (x, y)| p.matmul(&x, &y).map(|_| ()),
                    )
                    .unwrap()
                })
            });
            g.bench_with_input(BenchmarkId::new(format!("trunc_{mode}"), n), &n, |b, &n| {
                b.iter(|| run_op(&params, drop, |p| shared_input(p, n, n, 3), |p, z| p.trunc(&z).map(|_| ())).unwrap())
            });
        }
        for k in [64usize, 512] {
            g.bench_with_input(BenchmarkId::new(format!("relu_{mode}"), k), &k, |b, &k| {
                b.iter(|| run_op(&params, drop, |p| shared_fixed(p, 1, k, 4), |p, x| p.relu(&x).map(|_| ())).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("sigmoid_{mode}"), k), &k, |b, &k| {
                b.iter(|| run_op(&params, drop, |p| shared_fixed(p, 1, k, 5), |p, x| p.sigmoid(&x).map(|_| ())).unwrap())
            });
        }
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let params = Params::default_params();
    let ds = synthetic_binary(256, 32, 3).with_block_owners();
    let mut cfg = TrainConfig::new(ModelKind::Logistic);
    cfg.batch = 32;
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    g.bench_function("logistic_256x32_live_dealer", |b| {
        b.iter(|| train_local(&params, &ds, &cfg, Preproc::Live { seed: 1, record_masks: false }, 1).unwrap())
    });
    let plan = training_plan(&params, &ds.meta(cfg.labels), &cfg).unwrap();
    g.bench_function("dealer_pools_logistic_256x32", |b| b.iter(|| dealer_generate(&params, &plan, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, online_ops, training);
criterion_main!(benches);
