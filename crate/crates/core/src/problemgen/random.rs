//! Random unary-binary trees, standing in for the reference data generator.
//!
//! Operators are chosen uniformly from `add mul pow sin cos tan exp ln
//! sqrt`. The exponent of a power is always a small integer leaf, so the
//! operator budget goes entirely to the base. Leaves are `x` (50%), a small
//! nonzero integer (30%) or a small fraction (20%).

use rand::seq::IndexedRandom;
use rand::Rng;

use super::Problem;
use crate::calculus::{defined_somewhere, EquivConfig};
use crate::expr::{metrics, Expr, Func};
use crate::seed;

const EXPONENTS: [i64; 5] = [-2, -1, 2, 3, 4];

fn small_nonzero(rng: &mut impl Rng) -> i64 {
    let v = rng.random_range(1..=5);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

fn leaf(rng: &mut impl Rng) -> Expr {
    let u: f64 = rng.random();
    if u < 0.5 {
        Expr::X
    } else if u < 0.8 {
        Expr::int(small_nonzero(rng))
    } else {
        Expr::ratio(small_nonzero(rng), rng.random_range(2..=5))
    }
}

#[derive(Clone, Copy)]
enum Op {
    Add,
    Mul,
    Pow,
    Unary(Func),
}

const OPS: [Op; 9] = [
    Op::Add,
    Op::Mul,
    Op::Pow,
    Op::Unary(Func::Sin),
    Op::Unary(Func::Cos),
    Op::Unary(Func::Tan),
    Op::Unary(Func::Exp),
    Op::Unary(Func::Ln),
    Op::Unary(Func::Sqrt),
];

/// A tree with exactly `op_count` operator nodes in binary counting.
pub fn random_tree(op_count: usize, rng: &mut impl Rng) -> Expr {
    if op_count == 0 {
        return leaf(rng);
    }
    let rest = op_count - 1;
    match *OPS.choose(rng).expect("non-empty") {
        Op::Unary(f) => Expr::func(f, random_tree(rest, rng)),
        Op::Pow => Expr::pow(random_tree(rest, rng), Expr::int(*EXPONENTS.choose(rng).unwrap())),
        op => {
            let l = rng.random_range(0..=rest);
            let args = vec![random_tree(l, rng), random_tree(rest - l, rng)];
            if matches!(op, Op::Add) {
                Expr::add(args)
            } else {
                Expr::mul(args)
            }
        }
    }
}

/// A random tree whose depth does not exceed `max_depth` (≥ 2), with
/// between one and `max_depth + 2` operators.
pub fn random_tree_with_depth(max_depth: usize, rng: &mut impl Rng) -> Expr {
    assert!(max_depth >= 2, "depth 1 admits no operator");
    loop {
        let ops = rng.random_range(1..=max_depth + 2);
        let e = random_tree(ops, rng);
        if metrics(&e).depth <= max_depth {
            return e;
        }
    }
}

/// `n` trees with `op_count` operators; those outside the reference class
/// carry no ground truth.
pub fn random_tree_suite(op_count: usize, n: usize, run_seed: u64) -> Vec<Problem> {
    let mut rng = seed::rng_for(&[run_seed, 0xa1, op_count as u64]);
    (0..n)
        .map(|_| Problem::with_reference(random_tree(op_count, &mut rng), format!("ops{op_count}")))
        .collect()
}

/// Stand-in for externally supplied validation problems: short random
/// trees (at most 20 tokens) that have a reference integral and are
/// defined somewhere on the sample domain.
pub fn validation_substitute(n: usize, run_seed: u64) -> Vec<Problem> {
    let mut rng = seed::rng_for(&[run_seed, 0x5a]);
    let cfg = EquivConfig::default();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n.saturating_mul(1000) {
        if out.len() == n {
            break;
        }
        let e = random_tree(rng.random_range(1..=6), &mut rng);
        if metrics(&e).token_len > 20 || !defined_somewhere(&e, &cfg) {
            continue;
        }
        let p = Problem::with_reference(e, "validation");
        if p.truth.is_some() {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{verify_integral, VerdictStatus};

    #[test]
    fn exact_operator_counts() {
        let mut rng = seed::rng_for(&[1]);
        for ops in [1, 2, 5, 17, 35] {
            for _ in 0..50 {
                assert_eq!(metrics(&random_tree(ops, &mut rng)).op_node_count, ops);
            }
        }
    }

    #[test]
    fn depth_grows_with_operators() {
        let mean_depth = |ops| {
            let ps = random_tree_suite(ops, 2000, 9);
            ps.iter().map(|p| metrics(&p.expr).depth as f64).sum::<f64>() / ps.len() as f64
        };
        let (a, b, c) = (mean_depth(2), mean_depth(8), mean_depth(20));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn depth_cap() {
        let mut rng = seed::rng_for(&[2]);
        for _ in 0..200 {
            assert!(metrics(&random_tree_with_depth(6, &mut rng)).depth <= 6);
        }
    }

    #[test]
    fn substitutes_verify() {
        let ps = validation_substitute(40, 4);
        assert_eq!(ps.len(), 40);
        let cfg = EquivConfig::default();
        for p in &ps {
            let v = verify_integral(&p.expr, p.truth.as_ref().unwrap(), &cfg);
            assert_eq!(v.status, VerdictStatus::Correct, "{} -> {}", p.expr, p.truth.as_ref().unwrap());
        }
    }
}
