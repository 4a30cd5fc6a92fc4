use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use symint::calculus::{verify_integral, EquivConfig};
use symint::canonicalize;
use symint::metrics::{fail_at_k, EvalConfig};
use symint::model::{DecodeParams, FaultyModel};
use symint::oracle::FaultSpec;
use symint::problemgen::seed_sets;
use symint::sagga::{self, FitnessSpec, MutationConfig};
use symint_bench::{cos_suite, one_generation, trees, verify_pairs};

fn canonicalize_trees(c: &mut Criterion) {
    let ts = trees(200, 6, 1);
    c.bench_function("canonicalize 200 trees", |b| {
        b.iter(|| ts.iter().filter(|t| canonicalize(black_box(t)).is_ok()).count())
    });
}

fn verify(c: &mut Criterion) {
    let pairs = verify_pairs(50, 2);
    let cfg = EquivConfig::default();
    c.bench_function("verify 50 integrals", |b| {
        b.iter(|| pairs.iter().filter(|(p, t)| verify_integral(p, t, &cfg).is_success()).count())
    });
}

fn fail_at_k_cos(c: &mut Criterion) {
    let problems = cos_suite(200);
    let model = FaultyModel::new(FaultSpec::with_p(0.5));
    let cfg = EvalConfig { workers: 1, ..EvalConfig::default() };
    c.bench_function("fail@1,10 over 200 problems", |b| {
        b.iter(|| fail_at_k(&problems, &model, &DecodeParams::with_k(10), &[1, 10], &cfg).unwrap().rates)
    });
}

fn sagga_generation(c: &mut Criterion) {
    let model = FaultyModel::new(FaultSpec::with_p(0.5));
    let cfg = one_generation(3);
    let seeds = &seed_sets().default;
    let mut g = c.benchmark_group("sagga");
    g.sample_size(10);
    g.bench_function("one generation of 200 children", |b| {
        b.iter(|| {
            sagga::run(&cfg, &MutationConfig::default(), &FitnessSpec::ShortDefault, seeds, &model)
                .unwrap()
                .entries
                .len()
        })
    });
    g.finish();
}

criterion_group!(benches, canonicalize_trees, verify, fail_at_k_cos, sagga_generation);
criterion_main!(benches);
