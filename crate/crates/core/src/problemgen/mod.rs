//! Problem suites: primitive templates, perturbation neighborhoods,
//! compositions, integer extrapolation buckets, random trees and the fixed
//! search seed sets.

mod random;
mod seeds;

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{canonicalize, metrics, parse_infix, to_infix, Expr, ParseError};
use crate::metrics::{fail_at_k, EvalConfig};
use crate::model::{DecodeParams, Integrator, ModelError};
use crate::oracle::integrate_reference;
use crate::seed;

pub use random::{random_tree, random_tree_suite, random_tree_with_depth, validation_substitute};
pub use seeds::{seed_sets, SeedSets};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub expr: Expr,
    /// Known antiderivative; `None` marks a verify-only problem.
    pub truth: Option<Expr>,
    pub family: String,
}

impl Problem {
    pub fn new(expr: Expr) -> Self {
        Problem { expr, truth: None, family: String::new() }
    }

    /// Attaches the reference integral when the problem is supported.
    pub fn with_reference(expr: Expr, family: impl Into<String>) -> Self {
        let truth = integrate_reference(&expr);
        Problem { expr, truth, family: family.into() }
    }

    fn ground_truth(&self) -> Result<Expr, GenError> {
        self.truth
            .clone()
            .or_else(|| integrate_reference(&self.expr))
            .ok_or_else(|| GenError::NoGroundTruth(to_infix(&self.expr)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("only {available} distinct draws exist, {requested} requested")]
    RangeTooSmall { available: u128, requested: usize },
    #[error("no ground truth for `{0}`")]
    NoGroundTruth(String),
    #[error("empty problem pool")]
    EmptyPool,
    #[error("arity {0} outside 1..=4")]
    InvalidArity(usize),
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

fn canon(e: Expr) -> Expr {
    canonicalize(&e).unwrap_or(e)
}

/// Primitive templates of the coefficient-robustness neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Ln,
    Exp,
    Linear,
    Pow42,
    Sin,
    Cos,
    Tan,
}

impl Template {
    pub const ALL: [Template; 7] = [
        Template::Ln,
        Template::Exp,
        Template::Linear,
        Template::Pow42,
        Template::Sin,
        Template::Cos,
        Template::Tan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Ln => "k1*ln(k2*x)",
            Template::Exp => "k1*exp(k2*x)",
            Template::Linear => "k1*x",
            Template::Pow42 => "k1*x^42",
            Template::Sin => "k1*sin(k2*x)",
            Template::Cos => "k1*cos(k2*x)",
            Template::Tan => "k1*tan(k2*x)",
        }
    }

    pub fn from_name(s: &str) -> Option<Template> {
        let short = |t: Template| match t {
            Template::Ln => "ln",
            Template::Exp => "exp",
            Template::Linear => "linear",
            Template::Pow42 => "pow42",
            Template::Sin => "sin",
            Template::Cos => "cos",
            Template::Tan => "tan",
        };
        Template::ALL.into_iter().find(|&t| t.name() == s || short(t) == s)
    }

    /// `k2` is ignored by the single-coefficient templates.
    pub fn instantiate(self, k1: i64, k2: i64) -> Expr {
        let k1 = Expr::int(k1);
        let inner = || Expr::mul(vec![Expr::int(k2), Expr::X]);
        let body = match self {
            Template::Ln => Expr::ln(inner()),
            Template::Exp => Expr::exp(inner()),
            Template::Linear => Expr::X,
            Template::Pow42 => Expr::pow(Expr::X, Expr::int(42)),
            Template::Sin => Expr::sin(inner()),
            Template::Cos => Expr::cos(inner()),
            Template::Tan => Expr::tan(inner()),
        };
        Expr::mul(vec![k1, body])
    }
}

/// `n` distinct pairs from the inclusive square `[lo, hi]²`.
pub fn sample_pairs(
    (lo, hi): (i64, i64),
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(i64, i64)>, GenError> {
    if lo > hi {
        return Err(GenError::InvalidRange(format!("{lo} > {hi}")));
    }
    let width = (hi - lo + 1) as u128;
    let available = width * width;
    if (n as u128) > available {
        return Err(GenError::RangeTooSmall { available, requested: n });
    }
    let w = width as usize;
    Ok(sample(rng, w * w, n)
        .into_iter()
        .map(|i| (lo + (i / w) as i64, lo + (i % w) as i64))
        .collect())
}

/// `n` problems per template with coefficient pairs drawn without
/// replacement from `range`, each paired with its reference integral.
pub fn primitives_suite(
    templates: &[Template],
    range: (i64, i64),
    n: usize,
    run_seed: u64,
) -> Result<Vec<Problem>, GenError> {
    if range.0 < 1 || range.1 > 1_000_000 {
        return Err(GenError::InvalidRange(format!(
            "[{}, {}] is not within [1, 1000000]",
            range.0, range.1
        )));
    }
    let mut out = Vec::with_capacity(templates.len() * n);
    for (ti, &t) in templates.iter().enumerate() {
        let mut rng = seed::rng_for(&[run_seed, 0x7e, ti as u64]);
        for (k1, k2) in sample_pairs(range, n, &mut rng)? {
            out.push(Problem::with_reference(t.instantiate(k1, k2), t.name()));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `(1/k)·f`
    Divide,
    /// `k·f`
    Scale,
    /// `f + e^x`
    AddExp,
    /// `f + ln(x)`
    AddLn,
}

impl Perturbation {
    pub fn name(self) -> &'static str {
        match self {
            Perturbation::Divide => "1/k*f",
            Perturbation::Scale => "k*f",
            Perturbation::AddExp => "f+exp(x)",
            Perturbation::AddLn => "f+ln(x)",
        }
    }
}

/// Perturbs each base problem; ground truth follows by linearity. `k` is
/// drawn uniformly from `k_range` per problem; `(1/1)·f` and `1·f` are `f`.
pub fn perturb_suite(
    base: &[Problem],
    kind: Perturbation,
    k_range: (i64, i64),
    run_seed: u64,
) -> Result<Vec<Problem>, GenError> {
    if k_range.0 < 1 || k_range.0 > k_range.1 {
        return Err(GenError::InvalidRange(format!("k range {k_range:?}")));
    }
    let mut rng = seed::rng_for(&[run_seed, 0x9e]);
    base.iter()
        .map(|p| {
            let truth = p.ground_truth()?;
            let k = rng.random_range(k_range.0..=k_range.1);
            let (expr, truth) = match kind {
                Perturbation::Divide | Perturbation::Scale if k == 1 => (p.expr.clone(), truth),
                Perturbation::Divide => {
                    let c = Expr::ratio(1, k);
                    (Expr::mul(vec![c.clone(), p.expr.clone()]), Expr::mul(vec![c, truth]))
                }
                Perturbation::Scale => (
                    Expr::mul(vec![Expr::int(k), p.expr.clone()]),
                    Expr::mul(vec![Expr::int(k), truth]),
                ),
                Perturbation::AddExp => (
                    Expr::add(vec![p.expr.clone(), Expr::exp(Expr::X)]),
                    Expr::add(vec![truth, Expr::exp(Expr::X)]),
                ),
                Perturbation::AddLn => (
                    Expr::add(vec![p.expr.clone(), Expr::ln(Expr::X)]),
                    Expr::add(vec![
                        truth,
                        Expr::mul(vec![Expr::X, Expr::add(vec![Expr::ln(Expr::X), Expr::int(-1)])]),
                    ]),
                ),
            };
            Ok(Problem { expr, truth: Some(canon(truth)), family: kind.name().into() })
        })
        .collect()
}

/// `n` sums `f1 + … + f_arity` drawn uniformly with replacement from the
/// pool. Sums are flattened but not simplified, so term counts add up.
pub fn composition_suite(
    pool: &[Problem],
    arity: usize,
    n: usize,
    run_seed: u64,
) -> Result<Vec<Problem>, GenError> {
    if pool.is_empty() {
        return Err(GenError::EmptyPool);
    }
    if !(1..=4).contains(&arity) {
        return Err(GenError::InvalidArity(arity));
    }
    let truths = pool.iter().map(Problem::ground_truth).collect::<Result<Vec<_>, _>>()?;
    let mut rng = seed::rng_for(&[run_seed, 0xc0, arity as u64]);
    Ok((0..n)
        .map(|_| {
            let picks: Vec<usize> = (0..arity).map(|_| rng.random_range(0..pool.len())).collect();
            let expr = Expr::add(picks.iter().map(|&i| pool[i].expr.clone()).collect());
            let truth = canon(Expr::add(picks.iter().map(|&i| truths[i].clone()).collect()));
            Problem { expr, truth: Some(truth), family: format!("sum{arity}") }
        })
        .collect())
}

/// `x^c` and `x^(1/c)` for `c` in `1..=1000`, without duplicates.
pub fn exponent_pool() -> Vec<Problem> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in 1..=1000i64 {
        for e in [Expr::pow(Expr::X, Expr::int(c)), Expr::pow(Expr::X, Expr::ratio(1, c))] {
            let e = canon(e);
            if seen.insert(e.clone()) {
                out.push(Problem::with_reference(e, "exp"));
            }
        }
    }
    out
}

/// Keeps the pool members the model integrates correctly within `k`
/// candidates.
pub fn solved_subset(
    pool: &[Problem],
    model: &dyn Integrator,
    params: &DecodeParams,
    k: usize,
    cfg: &EvalConfig,
) -> Result<Vec<Problem>, ModelError> {
    let report = fail_at_k(pool, model, params, &[k], cfg)?;
    Ok(pool
        .iter()
        .zip(&report.records)
        .filter(|(_, r)| r.m_at(k) == 0)
        .map(|(p, _)| p.clone())
        .collect())
}

/// Per-bucket suites. Buckets are half-open `[lo, hi)` and must be
/// disjoint; both coefficients are drawn from the bucket.
pub fn integer_extrapolation_suite(
    templates: &[Template],
    buckets: &[(i64, i64)],
    n_per_bucket: usize,
    run_seed: u64,
) -> Result<Vec<((i64, i64), Vec<Problem>)>, GenError> {
    let mut sorted = buckets.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0].1 > w[1].0) {
        return Err(GenError::InvalidRange("buckets overlap".into()));
    }
    let mut out = Vec::new();
    for (bi, &(lo, hi)) in buckets.iter().enumerate() {
        if hi <= lo {
            return Err(GenError::RangeTooSmall { available: 0, requested: n_per_bucket });
        }
        let mut problems = Vec::new();
        for (ti, &t) in templates.iter().enumerate() {
            let mut rng = seed::rng_for(&[run_seed, 0xb0, bi as u64, ti as u64]);
            for (k1, k2) in sample_pairs((lo, hi - 1), n_per_bucket, &mut rng)? {
                problems.push(Problem::with_reference(t.instantiate(k1, k2), t.name()));
            }
        }
        out.push(((lo, hi), problems));
    }
    Ok(out)
}

/// Problem file: one problem per line in infix, optionally followed by a
/// tab and the ground-truth integral. Blank lines and `#` comments are
/// skipped.
pub fn read_problem_file(text: &str) -> Result<Vec<Problem>, (usize, ParseError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (p, t) = match line.split_once('\t') {
            Some((p, t)) => (p, Some(t)),
            None => (line, None),
        };
        let expr = parse_infix(p).map_err(|e| (i + 1, e))?;
        let truth = t.map(parse_infix).transpose().map_err(|e| (i + 1, e))?;
        out.push(Problem { expr, truth, family: "file".into() });
    }
    Ok(out)
}

pub fn write_problem_file(problems: &[Problem]) -> String {
    let mut s = String::new();
    for p in problems {
        s.push_str(&to_infix(&p.expr));
        if let Some(t) = &p.truth {
            s.push('\t');
            s.push_str(&to_infix(t));
        }
        s.push('\n');
    }
    s
}

/// Term count of a problem, for composition bookkeeping.
pub fn term_count(p: &Problem) -> usize {
    metrics(&p.expr).term_count
}
