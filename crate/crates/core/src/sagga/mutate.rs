//! Mutation operators over equation trees.
//!
//! Internal nodes (sums, products, powers, functions) and leaves (`x` and
//! literals) admit different mutations. A site is drawn uniformly among the
//! nodes that admit at least one enabled mutation, then one of the enabled
//! mutations applicable there is drawn uniformly.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{canonicalize, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InternalMutation {
    /// Replace the subtree by an integer.
    Constant,
    /// Replace the subtree by `x`.
    Symbol,
    /// Switch among `+`, `*` and `**`.
    Operation,
    /// Append a simple operation to a sum or product, or add one to a
    /// function's argument.
    AddArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafMutation {
    /// Replace a literal by an integer.
    Constant,
    /// Replace the leaf by `k·x`.
    Symbol,
    /// Replace the leaf by `k1 ∘ x^k2`.
    SimpleOp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    pub internal: Vec<InternalMutation>,
    pub leaf: Vec<LeafMutation>,
    /// Inclusive integer range for drawn constants.
    pub int_range: (i64, i64),
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            internal: vec![
                InternalMutation::Constant,
                InternalMutation::Symbol,
                InternalMutation::Operation,
                InternalMutation::AddArg,
            ],
            leaf: vec![LeafMutation::Constant, LeafMutation::Symbol, LeafMutation::SimpleOp],
            int_range: (-1000, 1000),
        }
    }
}

impl MutationConfig {
    /// Leaf constants only: the tree shape never changes.
    pub fn constant_only(int_range: (i64, i64)) -> Self {
        MutationConfig {
            internal: vec![],
            leaf: vec![LeafMutation::Constant],
            int_range,
        }
    }

    pub fn validate(&self) -> Result<(), MutateError> {
        if self.internal.is_empty() && self.leaf.is_empty() {
            return Err(MutateError::InvalidConfig("no mutation enabled".into()));
        }
        if self.int_range.0 >= self.int_range.1 {
            return Err(MutateError::InvalidConfig("int_range must satisfy min < max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutateError {
    #[error("no node admits an enabled mutation")]
    NoApplicableSite,
    #[error("no valid mutant after {0} attempts")]
    NoValidMutant(usize),
    #[error("invalid mutation config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Choice {
    Internal(InternalMutation),
    Leaf(LeafMutation),
}

fn applicable(node: &Expr, cfg: &MutationConfig) -> Vec<Choice> {
    let leaf = matches!(node, Expr::X | Expr::Int(_) | Expr::Rational(_));
    if leaf {
        cfg.leaf
            .iter()
            .filter(|m| **m != LeafMutation::Constant || node.is_literal())
            .map(|m| Choice::Leaf(*m))
            .collect()
    } else {
        cfg.internal
            .iter()
            .filter(|m| match m {
                InternalMutation::Constant | InternalMutation::Symbol => true,
                InternalMutation::Operation => {
                    matches!(node, Expr::Add(_) | Expr::Mul(_) | Expr::Pow(..))
                }
                InternalMutation::AddArg => {
                    matches!(node, Expr::Add(_) | Expr::Mul(_) | Expr::Fn(..))
                }
            })
            .map(|m| Choice::Internal(*m))
            .collect()
    }
}

fn draw_int(cfg: &MutationConfig, rng: &mut impl Rng) -> i64 {
    rng.random_range(cfg.int_range.0..=cfg.int_range.1)
}

/// `k1 ∘ x^k2` with `∘ ∈ {*, **, /}` and `k2 ∈ {1, 2}`.
pub fn simple_op(cfg: &MutationConfig, rng: &mut impl Rng) -> Expr {
    let k1 = Expr::int(draw_int(cfg, rng));
    let xk = if rng.random_bool(0.5) {
        Expr::X
    } else {
        Expr::pow(Expr::X, Expr::int(2))
    };
    match rng.random_range(0..3) {
        0 => Expr::mul(vec![k1, xk]),
        1 => Expr::pow(k1, xk),
        _ => Expr::div(k1, xk),
    }
}

fn apply(node: &Expr, choice: Choice, cfg: &MutationConfig, rng: &mut impl Rng) -> Expr {
    match choice {
        Choice::Leaf(LeafMutation::Constant) | Choice::Internal(InternalMutation::Constant) => {
            Expr::int(draw_int(cfg, rng))
        }
        Choice::Leaf(LeafMutation::Symbol) => {
            Expr::mul(vec![Expr::int(draw_int(cfg, rng)), Expr::X])
        }
        Choice::Internal(InternalMutation::Symbol) => Expr::X,
        Choice::Leaf(LeafMutation::SimpleOp) => simple_op(cfg, rng),
        Choice::Internal(InternalMutation::Operation) => {
            let args: Vec<Expr> = node.children().into_iter().cloned().collect();
            let mut targets = vec![];
            if !matches!(node, Expr::Add(_)) {
                targets.push(0);
            }
            if !matches!(node, Expr::Mul(_)) {
                targets.push(1);
            }
            // A power needs exactly two operands.
            if !matches!(node, Expr::Pow(..)) && args.len() == 2 {
                targets.push(2);
            }
            match *targets.choose(rng).expect("at least one other operator") {
                0 => Expr::add(args),
                1 => Expr::mul(args),
                _ => Expr::pow(args[0].clone(), args[1].clone()),
            }
        }
        Choice::Internal(InternalMutation::AddArg) => match node {
            Expr::Add(args) => {
                let mut a = args.clone();
                a.push(simple_op(cfg, rng));
                Expr::add(a)
            }
            Expr::Mul(args) => {
                let mut a = args.clone();
                a.push(simple_op(cfg, rng));
                Expr::mul(a)
            }
            Expr::Fn(f, arg) => Expr::func(*f, Expr::add(vec![(**arg).clone(), simple_op(cfg, rng)])),
            _ => unreachable!("AddArg filtered to n-ary nodes and functions"),
        },
    }
}

const MAX_ATTEMPTS: usize = 16;

/// One random mutation of `e`. The result always canonicalizes; draws
/// that would fold a literal division by zero are redrawn.
pub fn mutate(e: &Expr, cfg: &MutationConfig, rng: &mut impl Rng) -> Result<Expr, MutateError> {
    cfg.validate()?;
    let sites: Vec<(Vec<usize>, Vec<Choice>)> = e
        .paths()
        .into_iter()
        .filter_map(|p| {
            let c = applicable(e.at(&p).expect("path from paths()"), cfg);
            (!c.is_empty()).then_some((p, c))
        })
        .collect();
    if sites.is_empty() {
        return Err(MutateError::NoApplicableSite);
    }
    for _ in 0..MAX_ATTEMPTS {
        let (path, choices) = sites.choose(rng).expect("non-empty");
        let choice = *choices.choose(rng).expect("non-empty");
        let node = e.at(path).expect("valid path");
        let child = e.replace_at(path, apply(node, choice, cfg, rng));
        if canonicalize(&child).is_ok() {
            return Ok(child);
        }
    }
    Err(MutateError::NoValidMutant(MAX_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_infix, parse_prefix, shape_key, to_prefix};
    use crate::seed;

    fn p(s: &str) -> Expr {
        parse_infix(s).unwrap()
    }

    #[test]
    fn simple_op_on_x_can_give_five_over_x() {
        let cfg = MutationConfig {
            internal: vec![],
            leaf: vec![LeafMutation::SimpleOp],
            int_range: (1, 9),
        };
        let target = p("5/x");
        let found = (0..2000).any(|i| mutate(&Expr::X, &cfg, &mut seed::rng_for(&[i])).unwrap() == target);
        assert!(found);
    }

    #[test]
    fn add_arg_inside_exp() {
        let cfg = MutationConfig {
            internal: vec![InternalMutation::AddArg],
            leaf: vec![],
            int_range: (1, 5),
        };
        let target = p("exp(1 + 3*x^2)");
        let e = Expr::exp(Expr::int(1));
        let found = (0..2000).any(|i| mutate(&e, &cfg, &mut seed::rng_for(&[i])).unwrap() == target);
        assert!(found);
    }

    #[test]
    fn constant_only_preserves_shape() {
        let cfg = MutationConfig::constant_only((-100, 100));
        let e = p("2*x^42 + 21");
        let mut saw_22 = false;
        for i in 0..3000 {
            let m = mutate(&e, &cfg, &mut seed::rng_for(&[i])).unwrap();
            assert_eq!(shape_key(&m), shape_key(&e));
            saw_22 |= m == p("2*x^42 + 22");
        }
        assert!(saw_22);
    }

    #[test]
    fn constant_only_without_literals() {
        let cfg = MutationConfig::constant_only((-100, 100));
        assert_eq!(
            mutate(&p("sin(x)"), &cfg, &mut seed::rng_for(&[0])),
            Err(MutateError::NoApplicableSite)
        );
    }

    #[test]
    fn mutants_are_valid_and_round_trip() {
        let cfg = MutationConfig::default();
        let mut e = p("x^2 + x + 1");
        let mut rng = seed::rng_for(&[42]);
        for _ in 0..300 {
            e = mutate(&e, &cfg, &mut rng).unwrap();
            assert!(canonicalize(&e).is_ok());
            assert_eq!(parse_prefix(to_prefix(&e).as_slice()).unwrap(), e);
            if crate::expr::metrics(&e).token_len > 60 {
                e = p("x^2 + x + 1");
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let empty = MutationConfig { internal: vec![], leaf: vec![], int_range: (0, 1) };
        assert!(matches!(mutate(&Expr::X, &empty, &mut seed::rng_for(&[0])), Err(MutateError::InvalidConfig(_))));
        let bad = MutationConfig { int_range: (3, 3), ..MutationConfig::default() };
        assert!(bad.validate().is_err());
    }
}
