//! Structural size measures.
//!
//! Everything is measured on the binary tree implied by the prefix
//! serialization: an n-ary sum or product counts as `n - 1` binary
//! operators, and a literal (including a rational) is a single leaf.

use serde::{Deserialize, Serialize};

use super::prefix::prefix_len;
use super::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExprMetrics {
    /// Prefix token count.
    pub token_len: usize,
    pub node_count: usize,
    pub op_node_count: usize,
    pub depth: usize,
    /// Number of `+` operations plus one.
    pub term_count: usize,
}

pub fn metrics(e: &Expr) -> ExprMetrics {
    let (ops, leaves, adds) = counts(e);
    ExprMetrics {
        token_len: prefix_len(e),
        node_count: ops + leaves,
        op_node_count: ops,
        depth: depth(e),
        term_count: adds + 1,
    }
}

/// (operator nodes, leaves, add operators)
fn counts(e: &Expr) -> (usize, usize, usize) {
    match e {
        Expr::Int(_) | Expr::Rational(_) | Expr::X => (0, 1, 0),
        Expr::Add(args) | Expr::Mul(args) => {
            let own = args.len() - 1;
            let mut acc = (own, 0, if matches!(e, Expr::Add(_)) { own } else { 0 });
            for a in args {
                let (o, l, s) = counts(a);
                acc.0 += o;
                acc.1 += l;
                acc.2 += s;
            }
            acc
        }
        Expr::Pow(b, x) => {
            let (o1, l1, s1) = counts(b);
            let (o2, l2, s2) = counts(x);
            (1 + o1 + o2, l1 + l2, s1 + s2)
        }
        Expr::Fn(_, a) => {
            let (o, l, s) = counts(a);
            (o + 1, l, s)
        }
    }
}

fn depth(e: &Expr) -> usize {
    match e {
        Expr::Int(_) | Expr::Rational(_) | Expr::X => 1,
        // Left-nested chain: the first two arguments sit n-1 levels down,
        // argument i (i >= 1) sits n-i levels down.
        Expr::Add(args) | Expr::Mul(args) => {
            let n = args.len();
            args.iter()
                .enumerate()
                .map(|(i, a)| depth(a) + (n - i.max(1)))
                .max()
                .unwrap_or(1)
        }
        Expr::Pow(b, x) => 1 + depth(b).max(depth(x)),
        Expr::Fn(_, a) => 1 + depth(a),
    }
}

/// Tree shape with literal values erased, as a compact string. Two
/// expressions share a shape key iff they differ only in literal leaves.
pub fn shape_key(e: &Expr) -> String {
    fn go(e: &Expr, out: &mut String) {
        match e {
            Expr::Int(_) | Expr::Rational(_) => out.push('#'),
            Expr::X => out.push('x'),
            Expr::Add(args) | Expr::Mul(args) => {
                out.push(if matches!(e, Expr::Add(_)) { '+' } else { '*' });
                out.push_str(&args.len().to_string());
                out.push('(');
                for a in args {
                    go(a, out);
                    out.push(',');
                }
                out.push(')');
            }
            Expr::Pow(b, x) => {
                out.push_str("^(");
                go(b, out);
                out.push(',');
                go(x, out);
                out.push(')');
            }
            Expr::Fn(f, a) => {
                out.push_str(f.name());
                out.push('(');
                go(a, out);
                out.push(')');
            }
        }
    }
    let mut s = String::new();
    go(e, &mut s);
    s
}
