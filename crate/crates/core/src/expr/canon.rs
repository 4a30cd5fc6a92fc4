//! Canonical normal form.
//!
//! Bottom-up rebuild that flattens sums and products, folds literal
//! arithmetic exactly, merges like terms (`c1·t + c2·t`) and like powers
//! (`t^a · t^b`), distributes a product over a single sum factor and
//! sorts arguments by the [`Expr`] total order. The rebuild is repeated
//! until it reaches a fixed point, so the result is idempotent.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::{Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("division by zero while folding literals")]
    DivisionByZero,
}

/// Exact integer powers are only folded while the result stays below
/// this many bits.
const MAX_FOLD_BITS: u64 = 4096;
const MAX_PASSES: usize = 8;

pub fn canonicalize(e: &Expr) -> Result<Expr, CanonError> {
    let mut cur = rebuild(e)?;
    for _ in 1..MAX_PASSES {
        let next = rebuild(&cur)?;
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

fn rebuild(e: &Expr) -> Result<Expr, CanonError> {
    Ok(match e {
        Expr::Int(_) | Expr::X => e.clone(),
        Expr::Rational(r) => Expr::literal(r.clone()),
        Expr::Add(args) => build_add(args.iter().map(rebuild).collect::<Result<_, _>>()?)?,
        Expr::Mul(args) => build_mul(args.iter().map(rebuild).collect::<Result<_, _>>()?)?,
        Expr::Pow(b, x) => build_pow(rebuild(b)?, rebuild(x)?)?,
        Expr::Fn(f, a) => build_fn(*f, rebuild(a)?),
    })
}

/// Splits a canonical term into its literal coefficient and the rest.
pub(crate) fn split_coeff(term: &Expr) -> (BigRational, Expr) {
    match term {
        Expr::Int(_) | Expr::Rational(_) => (term.as_literal().unwrap(), Expr::int(1)),
        Expr::Mul(args) if args[0].is_literal() => {
            let c = args[0].as_literal().unwrap();
            let rest: Vec<Expr> = args[1..].to_vec();
            (c, Expr::mul(rest))
        }
        other => (BigRational::one(), other.clone()),
    }
}

/// `c·rest` for an already canonical `rest` with no literal factor.
pub(crate) fn with_coeff(c: BigRational, rest: Expr) -> Expr {
    if c.is_zero() {
        return Expr::int(0);
    }
    if rest.is_one() {
        return Expr::literal(c);
    }
    if c.is_one() {
        return rest;
    }
    let mut args = vec![Expr::literal(c)];
    match rest {
        Expr::Mul(inner) => args.extend(inner),
        other => args.push(other),
    }
    Expr::Mul(args)
}

pub(crate) fn build_add(terms: Vec<Expr>) -> Result<Expr, CanonError> {
    let mut constant = BigRational::zero();
    let mut groups: BTreeMap<Expr, BigRational> = BTreeMap::new();
    let mut pending = terms;
    while let Some(t) = pending.pop() {
        match t {
            Expr::Add(inner) => pending.extend(inner),
            Expr::Int(_) | Expr::Rational(_) => constant += t.as_literal().unwrap(),
            other => {
                let (c, rest) = split_coeff(&other);
                *groups.entry(rest).or_insert_with(BigRational::zero) += c;
            }
        }
    }
    let mut out: Vec<Expr> = groups
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(rest, c)| with_coeff(c, rest))
        .collect();
    if !constant.is_zero() {
        out.push(Expr::literal(constant));
    }
    out.sort();
    Ok(match out.len() {
        0 => Expr::int(0),
        1 => out.pop().unwrap(),
        _ => Expr::Add(out),
    })
}

pub(crate) fn build_mul(factors: Vec<Expr>) -> Result<Expr, CanonError> {
    let mut coeff = BigRational::one();
    let mut powers: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    let mut pending = factors;
    while let Some(f) = pending.pop() {
        match f {
            Expr::Mul(inner) => pending.extend(inner),
            Expr::Int(_) | Expr::Rational(_) => coeff *= f.as_literal().unwrap(),
            Expr::Pow(b, x) => powers.entry(*b).or_default().push(*x),
            other => powers.entry(other).or_default().push(Expr::int(1)),
        }
    }
    if coeff.is_zero() {
        return Ok(Expr::int(0));
    }
    let mut rest = Vec::new();
    for (base, exps) in powers {
        let exponent = build_add(exps)?;
        match build_pow(base, exponent)? {
            p if p.is_literal() => coeff *= p.as_literal().unwrap(),
            Expr::Mul(inner) => {
                for f in inner {
                    if f.is_literal() {
                        coeff *= f.as_literal().unwrap();
                    } else {
                        rest.push(f);
                    }
                }
            }
            p => rest.push(p),
        }
    }
    if coeff.is_zero() {
        return Ok(Expr::int(0));
    }
    let sums = rest.iter().filter(|f| matches!(f, Expr::Add(_))).count();
    if sums == 1 && (rest.len() > 1 || !coeff.is_one()) {
        let idx = rest.iter().position(|f| matches!(f, Expr::Add(_))).unwrap();
        let Expr::Add(terms) = rest.remove(idx) else { unreachable!() };
        let mut distributed = Vec::with_capacity(terms.len());
        for t in terms {
            let mut fs = rest.clone();
            fs.push(t);
            fs.push(Expr::literal(coeff.clone()));
            distributed.push(build_mul(fs)?);
        }
        return build_add(distributed);
    }
    rest.sort();
    Ok(with_coeff(coeff, Expr::mul(rest)))
}

fn small_int(e: &Expr) -> Option<i64> {
    e.as_int().and_then(ToPrimitive::to_i64)
}

pub(crate) fn build_pow(base: Expr, exp: Expr) -> Result<Expr, CanonError> {
    if exp.is_zero() {
        return Ok(Expr::int(1));
    }
    if exp.is_one() {
        return Ok(base);
    }
    if base.is_one() {
        return Ok(Expr::int(1));
    }
    if base.is_zero() {
        if let Some(v) = exp.as_literal() {
            return if v.is_positive() {
                Ok(Expr::int(0))
            } else {
                Err(CanonError::DivisionByZero)
            };
        }
        return Ok(Expr::pow(base, exp));
    }
    if let (Some(b), Some(n)) = (base.as_literal(), small_int(&exp)) {
        let bits = b.numer().bits().max(b.denom().bits());
        if bits.saturating_mul(n.unsigned_abs()) <= MAX_FOLD_BITS {
            let r = num_traits::pow::Pow::pow(&b, n.unsigned_abs());
            return Ok(Expr::literal(if n < 0 { r.recip() } else { r }));
        }
    }
    if exp.as_int().is_some() {
        match base {
            Expr::Pow(b2, e2) => return build_pow(*b2, build_mul(vec![*e2, exp])?),
            Expr::Mul(fs) => {
                let parts = fs
                    .into_iter()
                    .map(|f| build_pow(f, exp.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                return build_mul(parts);
            }
            Expr::Fn(Func::Sqrt, a) => {
                let n = exp.as_int().unwrap();
                if (n % BigInt::from(2)).is_zero() {
                    return build_pow(*a, Expr::Int(n / 2));
                }
                return Ok(Expr::pow(Expr::Fn(Func::Sqrt, a), exp));
            }
            Expr::Fn(Func::Exp, a) => {
                return Ok(build_fn(Func::Exp, build_mul(vec![*a, exp])?));
            }
            other => return Ok(Expr::pow(other, exp)),
        }
    }
    Ok(Expr::pow(base, exp))
}

pub(crate) fn build_fn(f: Func, arg: Expr) -> Expr {
    match (f, &arg) {
        (Func::Sin | Func::Tan | Func::Sqrt, a) if a.is_zero() => Expr::int(0),
        (Func::Cos | Func::Exp, a) if a.is_zero() => Expr::int(1),
        (Func::Ln, a) if a.is_one() => Expr::int(0),
        (Func::Sqrt, a) if a.is_one() => Expr::int(1),
        (Func::Ln, Expr::Fn(Func::Exp, inner)) => (**inner).clone(),
        (Func::Exp, Expr::Fn(Func::Ln, inner)) => (**inner).clone(),
        (Func::Sqrt, Expr::Int(v)) if v.is_positive() => {
            let r = v.sqrt();
            if &(&r * &r) == v {
                Expr::Int(r)
            } else {
                Expr::func(f, arg)
            }
        }
        _ => Expr::func(f, arg),
    }
}
