//! Single-variable expression trees.
//!
//! [`Expr`] is the currency of the whole crate: suites generate it, models
//! consume and emit it (through the prefix token format), the verifier
//! differentiates it and the genetic search mutates it.
//!
//! Sums and products are n-ary. The smart constructors ([`Expr::add`],
//! [`Expr::mul`], ...) only flatten nested nodes of the same kind; all
//! algebraic folding lives in [`canonicalize`].

mod canon;
mod eval;
mod infix;
mod metrics;
mod path;
mod prefix;

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use canon::{canonicalize, CanonError};
pub use eval::{eval_at, DomainError};
pub use infix::{parse_infix, to_infix};
pub use metrics::{metrics, shape_key, ExprMetrics};
pub use prefix::{decode_int, encode_int, parse_prefix, to_prefix, TokenSeq};

/// Unary functions of the vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    /// Accepts `log` as an alias of `ln`.
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn is_trig(self) -> bool {
        matches!(self, Func::Sin | Func::Cos | Func::Tan)
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An algebraic expression in the single symbol `x`.
///
/// Invariants kept by every constructor in this module:
/// `Rational` is reduced, has a positive denominator and is never
/// integer-valued; `Add`/`Mul` hold at least two arguments and never a
/// direct child of their own kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(BigInt),
    Rational(BigRational),
    X,
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Fn(Func, Box<Expr>),
}

impl Expr {
    pub fn x() -> Expr {
        Expr::X
    }

    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    pub fn integer(v: BigInt) -> Expr {
        Expr::Int(v)
    }

    /// Builds a literal, demoting integer-valued ratios to `Int`.
    pub fn literal(v: BigRational) -> Expr {
        if v.is_integer() {
            Expr::Int(v.to_integer())
        } else {
            Expr::Rational(v)
        }
    }

    /// `num/den` as a literal. Panics if `den` is zero.
    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::literal(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn add(args: Vec<Expr>) -> Expr {
        Self::nary(args, true)
    }

    pub fn mul(args: Vec<Expr>) -> Expr {
        Self::nary(args, false)
    }

    fn nary(args: Vec<Expr>, is_add: bool) -> Expr {
        let mut flat = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Expr::Add(inner) if is_add => flat.extend(inner),
                Expr::Mul(inner) if !is_add => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Expr::int(if is_add { 0 } else { 1 }),
            1 => flat.pop().unwrap(),
            _ if is_add => Expr::Add(flat),
            _ => Expr::Mul(flat),
        }
    }

    pub fn pow(base: Expr, exp: Expr) -> Expr {
        Expr::Pow(Box::new(base), Box::new(exp))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Fn(f, Box::new(arg))
    }

    pub fn sin(arg: Expr) -> Expr {
        Expr::func(Func::Sin, arg)
    }

    pub fn cos(arg: Expr) -> Expr {
        Expr::func(Func::Cos, arg)
    }

    pub fn tan(arg: Expr) -> Expr {
        Expr::func(Func::Tan, arg)
    }

    pub fn exp(arg: Expr) -> Expr {
        Expr::func(Func::Exp, arg)
    }

    pub fn ln(arg: Expr) -> Expr {
        Expr::func(Func::Ln, arg)
    }

    pub fn sqrt(arg: Expr) -> Expr {
        Expr::func(Func::Sqrt, arg)
    }

    /// `-e`. Literals are negated in place and a leading literal
    /// coefficient absorbs the sign; anything else becomes `(-1)·e`.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Int(v) => Expr::Int(-v),
            Expr::Rational(v) => Expr::Rational(-v),
            Expr::Mul(mut args) if args[0].is_literal() => {
                let first = std::mem::replace(&mut args[0], Expr::X);
                args[0] = Expr::neg(first);
                Expr::Mul(args)
            }
            other => Expr::mul(vec![Expr::int(-1), other]),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    /// `a/b`. Two literals fold exactly (unless `b` is zero); a literal
    /// divisor becomes its reciprocal; otherwise `a·b^(-1)`.
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_literal(), b.as_literal()) {
            (Some(n), Some(d)) if !d.is_zero() => Expr::literal(n / d),
            (_, Some(d)) if !d.is_zero() => Expr::mul(vec![a, Expr::literal(d.recip())]),
            _ => Expr::mul(vec![a, Expr::pow(b, Expr::int(-1))]),
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Rational(_))
    }

    pub fn as_literal(&self) -> Option<BigRational> {
        match self {
            Expr::Int(v) => Some(BigRational::from_integer(v.clone())),
            Expr::Rational(v) => Some(v.clone()),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Expr::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Int(v) if v.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Int(v) if v.is_one())
    }

    /// True when `x` occurs anywhere in the tree.
    pub fn has_x(&self) -> bool {
        match self {
            Expr::X => true,
            Expr::Int(_) | Expr::Rational(_) => false,
            Expr::Add(args) | Expr::Mul(args) => args.iter().any(Expr::has_x),
            Expr::Pow(b, e) => b.has_x() || e.has_x(),
            Expr::Fn(_, a) => a.has_x(),
        }
    }

    pub fn contains_func(&self, pred: &dyn Fn(Func) -> bool) -> bool {
        match self {
            Expr::X | Expr::Int(_) | Expr::Rational(_) => false,
            Expr::Add(args) | Expr::Mul(args) => args.iter().any(|a| a.contains_func(pred)),
            Expr::Pow(b, e) => b.contains_func(pred) || e.contains_func(pred),
            Expr::Fn(f, a) => pred(*f) || a.contains_func(pred),
        }
    }

    /// Direct children, in order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::X | Expr::Int(_) | Expr::Rational(_) => Vec::new(),
            Expr::Add(args) | Expr::Mul(args) => args.iter().collect(),
            Expr::Pow(b, e) => vec![b, e],
            Expr::Fn(_, a) => vec![a],
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Int(_) | Expr::Rational(_) => 0,
            Expr::X => 1,
            Expr::Pow(..) => 2,
            Expr::Mul(_) => 3,
            Expr::Add(_) => 4,
            Expr::Fn(..) => 5,
        }
    }
}

impl Ord for Expr {
    /// Total order used to sort sum and product arguments: variant rank
    /// first, then children left to right, then literal value.
    fn cmp(&self, other: &Self) -> Ordering {
        let by_rank = self.rank().cmp(&other.rank());
        if by_rank != Ordering::Equal {
            return by_rank;
        }
        match (self, other) {
            (Expr::X, Expr::X) => Ordering::Equal,
            (Expr::Add(a), Expr::Add(b)) | (Expr::Mul(a), Expr::Mul(b)) => {
                a.len().cmp(&b.len()).then_with(|| a.cmp(b))
            }
            (Expr::Pow(b1, e1), Expr::Pow(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Expr::Fn(f1, a1), Expr::Fn(f2, a2)) => f1.cmp(f2).then_with(|| a1.cmp(a2)),
            _ => {
                let l = self.as_literal().expect("rank 0 is literal");
                let r = other.as_literal().expect("rank 0 is literal");
                l.cmp(&r)
                    .then_with(|| matches!(self, Expr::Rational(_)).cmp(&matches!(other, Expr::Rational(_))))
            }
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_infix(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_infix(s)
    }
}

/// Failure to read an expression from prefix tokens or infix text.
/// Positions are token indices (prefix) or byte offsets (infix).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("token stream ended inside a subtree at position {pos}")]
    Underflow { pos: usize },
    #[error("unconsumed tokens starting at position {pos}")]
    TrailingTokens { pos: usize },
    #[error("unknown token {token:?} at position {pos}")]
    UnknownToken { pos: usize, token: String },
    #[error("integer sign at position {pos} is not followed by digits")]
    MalformedInteger { pos: usize },
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

pub(crate) fn is_negative_literal(e: &Expr) -> bool {
    match e {
        Expr::Int(v) => v.is_negative(),
        Expr::Rational(v) => v.is_negative(),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_flatten_same_kind() {
        let e = Expr::add(vec![Expr::add(vec![Expr::X, Expr::int(1)]), Expr::int(2)]);
        assert_eq!(e, Expr::Add(vec![Expr::X, Expr::int(1), Expr::int(2)]));
        let m = Expr::mul(vec![Expr::int(3), Expr::mul(vec![Expr::X, Expr::X])]);
        assert_eq!(m, Expr::Mul(vec![Expr::int(3), Expr::X, Expr::X]));
    }

    #[test]
    fn literal_demotes_integers() {
        assert_eq!(Expr::ratio(4, 2), Expr::int(2));
        assert!(matches!(Expr::ratio(2, 3), Expr::Rational(_)));
        assert_eq!(Expr::ratio(2, -4), Expr::Rational(BigRational::new((-1).into(), 2.into())));
    }

    #[test]
    fn neg_absorbs_into_coefficient() {
        let e = Expr::neg(Expr::mul(vec![Expr::int(3), Expr::X]));
        assert_eq!(e, Expr::Mul(vec![Expr::int(-3), Expr::X]));
        assert_eq!(Expr::neg(Expr::X), Expr::Mul(vec![Expr::int(-1), Expr::X]));
    }

    #[test]
    fn div_of_literals_folds() {
        assert_eq!(Expr::div(Expr::int(10), Expr::int(13)), Expr::ratio(10, 13));
        assert_eq!(
            Expr::div(Expr::int(1), Expr::int(0)),
            Expr::Mul(vec![Expr::int(1), Expr::pow(Expr::int(0), Expr::int(-1))])
        );
    }

    #[test]
    fn order_puts_literals_first() {
        let mut v = vec![Expr::sin(Expr::X), Expr::X, Expr::int(2)];
        v.sort();
        assert_eq!(v, vec![Expr::int(2), Expr::X, Expr::sin(Expr::X)]);
    }
}

/// Serialized as its prefix token string, which round-trips structurally.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_prefix(self).to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let toks: TokenSeq = s.parse().unwrap_or_else(|e| match e {});
        toks.parse().map_err(serde::de::Error::custom)
    }
}
