//! Deterministic fixtures shared by the benchmarks.

use symint::problemgen::{composition_suite, primitives_suite, random_tree, Problem, Template};
use symint::sagga::SaggaConfig;
use symint::seed::rng_for;
use symint::Expr;

/// `n` random trees with `ops` operators each.
pub fn trees(n: usize, ops: usize, seed: u64) -> Vec<Expr> {
    let mut rng = rng_for(&[seed, ops as u64]);
    (0..n).map(|_| random_tree(ops, &mut rng)).collect()
}

/// Three-term sums of primitives paired with their antiderivatives.
pub fn verify_pairs(n: usize, seed: u64) -> Vec<(Expr, Expr)> {
    let base = primitives_suite(&Template::ALL, (1, 100), 50, seed).expect("range holds enough pairs");
    composition_suite(&base, 3, n, seed)
        .expect("pool is non-empty")
        .into_iter()
        .filter_map(|p| Some((p.expr, p.truth?)))
        .collect()
}

pub fn cos_suite(n: usize) -> Vec<Problem> {
    primitives_suite(&[Template::Cos], (1, 100), n, 1).expect("range holds enough pairs")
}

/// A single SAGGA generation on a reduced population.
pub fn one_generation(run_seed: u64) -> SaggaConfig {
    SaggaConfig {
        seed_size: 20,
        generation_size: 200,
        cluster_count: 4,
        archive_target: 10_000,
        generation_cap: 1,
        run_seed,
        workers: 1,
        ..SaggaConfig::default()
    }
}
